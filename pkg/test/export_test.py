import numpy as np
import pytest

from pyaev.bilevel import BilevelConfig, big_m_reformulate, build_single_level
from pyaev.errors import ModelFormatError
from pyaev.lp_core import (
    ModelBuilder,
    Sense,
    export_model,
    load_mps,
    read_lp,
    read_mps,
    save_mps,
    write_lp,
    write_mps,
)

TOY_MPS = """\
NAME          toy
OBJSENSE
    MIN
ROWS
 N  obj
 L  c1
 G  c2
COLUMNS
    x         obj       0.5
    x         c1        1.0
    x         c2        1.0
    MARKER0   'MARKER'  'INTORG'
    z         obj       -2.0
    z         c1        2.0
    z         c2        -1.0
    MARKER1   'MARKER'  'INTEND'
RHS
    RHS       obj       -0.5
    RHS       c1        3.0
    RHS       c2        -1.0
BOUNDS
 UP BND       x         4.0
 BV BND       z
QMATRIX
    x         x         1.0
ENDATA
"""

TOY_LP = """\
\\Problem name: toy

Minimize
 obj: + 0.5 x - 2.0 z + [ + 1.0 x ^ 2 ] / 2 + 0.5
Subject To
 c1: + 1.0 x + 2.0 z <= 3.0
 c2: + 1.0 x - 1.0 z >= -1.0
Bounds
 0.0 <= x <= 4.0
Binaries
 z
End
"""


def toy_model():
    b = ModelBuilder("toy")
    x = b.add_var("x", 0.0, 4.0, cost=1.5)
    z = b.add_var("z", binary=True, cost=-2.0)
    b.add_row("c1", [x, z], [1.0, 2.0], Sense.LE, 3.0)
    b.add_row("c2", [x, z], [1.0, -1.0], Sense.GE, -1.0)
    # 0.5 (x - 1)^2 = 0.5 x^2 - x + 0.5
    b.add_square([x], [1.0], target=1.0, weight=0.5)
    return b.build()


def test_mps_text_is_stable():
    assert write_mps(toy_model()) == TOY_MPS


def test_lp_text_is_stable():
    assert write_lp(toy_model()) == TOY_LP


def test_export_model_picks_the_writer():
    assert export_model(toy_model(), "mps") == TOY_MPS
    assert export_model(toy_model(), "LP") == TOY_LP
    assert export_model(toy_model(), "lp_text") == TOY_LP
    with pytest.raises(ModelFormatError):
        export_model(toy_model(), "nl")

    stamped = export_model(toy_model(), "mps", digest="abc123")
    assert stamped == "* pyaev digest=abc123\n" + TOY_MPS
    assert read_mps(stamped).equals(toy_model())
    stamped = export_model(toy_model(), "lp", digest="abc123")
    assert stamped.startswith("\\ pyaev digest=abc123\n")
    assert read_lp(stamped).equals(toy_model())


def test_toy_round_trips():
    model = toy_model()
    assert read_mps(TOY_MPS).equals(model)
    assert read_lp(TOY_LP).equals(model)


def test_free_and_fixed_bounds_round_trip(tmp_path):
    b = ModelBuilder("bounds")
    u = b.add_var("u", -np.inf, np.inf, cost=1.0)
    v = b.add_var("v", 2.5, 2.5)
    w = b.add_var("w", -3.0, np.inf)
    y = b.add_var("y", -np.inf, 7.0)
    b.add_row("r", [u, v, w, y], [1.0, -1.0, 0.25, 1.0], Sense.EQ, 0.0)
    model = b.build()
    assert read_lp(write_lp(model)).equals(model)
    path = save_mps(model, tmp_path / "bounds.mps")
    assert load_mps(path).equals(model)


def test_reserved_objective_row_name():
    b = ModelBuilder("clash")
    x = b.add_var("x")
    b.add_row("obj", [x], [1.0], Sense.LE, 1.0)
    with pytest.raises(ModelFormatError):
        write_mps(b.build())


def test_malformed_mps_is_rejected():
    with pytest.raises(ModelFormatError):
        read_mps(TOY_MPS.replace("    x         c1        1.0", "    x         c1        one"))


def test_single_level_model_round_trips(pair_case):
    fleet, agg, reference, prices = pair_case
    slm = big_m_reformulate(build_single_level(reference, agg, BilevelConfig(group_width=24), prices))
    model = slm.model
    assert model.has_integers and model.has_quadratic
    assert read_mps(write_mps(model)).equals(model)
    assert read_lp(write_lp(model)).equals(model)
