from .pipeline import Pipeline, aev_name
