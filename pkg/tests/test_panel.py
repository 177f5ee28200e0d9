import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gee_subsample.errors import BalanceError, EmptyPanelError, ParseError, SchemaError
from gee_subsample.panel import CsvSchema, Panel, Subject, read_panel, write_panel
from gee_subsample.simulate import SimConfig, simulate


def _write(tmp_path, text, name="p.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_read_two_by_two(tmp_path):
    path = _write(tmp_path, "id,time,y,x1\na,1,1.5,0.1\na,2,2.5,0.2\nb,1,3.5,0.3\nb,2,4.5,0.4\n")
    P = read_panel(path)
    assert (P.m, P.n, P.p) == (2, 2, 1)
    assert P.ids == ("a", "b")
    np.testing.assert_array_equal(P.y, [[1.5, 2.5], [3.5, 4.5]])
    np.testing.assert_array_equal(P.X[:, :, 0], [[0.1, 0.2], [0.3, 0.4]])
    assert P.covariate_names == ("x1",)


def test_rows_sorted_by_time_and_grouped_by_first_appearance(tmp_path):
    text = "id,time,y,x\n2,2,20,0\n1,2,12,0\n2,1,10,0\n1,1,11,0\n"
    P = read_panel(_write(tmp_path, text))
    assert P.ids == ("2", "1")
    np.testing.assert_array_equal(P.y, [[10, 20], [11, 12]])


def test_time_none_keeps_file_order(tmp_path):
    text = "id,time,y,x\n1,2,12,0\n1,1,11,0\n"
    P = read_panel(_write(tmp_path, text), CsvSchema(time=None, covariates=("x",)))
    np.testing.assert_array_equal(P.y, [[12, 11]])


def test_crlf_and_custom_columns(tmp_path):
    text = "subj,t,resp,a,b\r\n1,1,0.5,1,2\r\n1,2,0.25,3,4\r\n"
    schema = CsvSchema(id="subj", time="t", response="resp", covariates=("b",))
    P = read_panel(_write(tmp_path, text), schema)
    assert P.p == 1
    np.testing.assert_array_equal(P.X[0, :, 0], [2, 4])


def test_balance_error_names_subject(tmp_path):
    rows = ["id,time,y,x"]
    for sid in ("1", "7", "9"):
        k = 3 if sid == "7" else 4
        rows += [f"{sid},{t},0,0" for t in range(k)]
    with pytest.raises(BalanceError) as exc:
        read_panel(_write(tmp_path, "\n".join(rows) + "\n"))
    assert exc.value.subject_id == "7"
    assert "'7'" in str(exc.value)


def test_header_only_is_empty(tmp_path):
    with pytest.raises(EmptyPanelError):
        read_panel(_write(tmp_path, "id,time,y,x\n"))


def test_missing_column(tmp_path):
    with pytest.raises(SchemaError, match="'y'"):
        read_panel(_write(tmp_path, "id,time,resp,x\n1,1,0,0\n"))


def test_parse_error_reports_row(tmp_path):
    with pytest.raises(ParseError) as exc:
        read_panel(_write(tmp_path, "id,time,y,x\n1,1,0,0\n1,2,oops,0\n"))
    assert exc.value.row == 3
    assert "row 3" in str(exc.value)


@pytest.mark.parametrize("cell", ["", "nan", "inf"])
def test_missing_and_nonfinite_cells_rejected(tmp_path, cell):
    with pytest.raises(ParseError):
        read_panel(_write(tmp_path, f"id,time,y,x\n1,1,{cell},0\n"))


def test_ragged_row(tmp_path):
    with pytest.raises(ParseError, match="row 2"):
        read_panel(_write(tmp_path, "id,time,y,x\n1,1,0\n"))


def test_minimal_write(tmp_path):
    P = Panel(("s",), np.zeros((1, 1, 1)), np.zeros((1, 1)))
    path = tmp_path / "o.csv"
    write_panel(P, path)
    assert path.read_text().splitlines() == ["id,time,y,x1", "s,1,0,0"]


def test_write_to_directory_fails(tmp_path):
    P = Panel(("s",), np.zeros((1, 1, 1)), np.zeros((1, 1)))
    with pytest.raises(OSError):
        write_panel(P, tmp_path)


def test_round_trip_generated_case1(tmp_path):
    P = simulate(SimConfig("linear", m=30, seed=4))
    write_panel(P, tmp_path / "c1.csv")
    assert read_panel(tmp_path / "c1.csv").equals(P)


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=40, deadline=None)
@given(
    st.integers(1, 4).flatmap(
        lambda m: st.tuples(
            st.just(m),
            arrays(np.float64, (m, 2, 2), elements=finite),
            arrays(np.float64, (m, 2), elements=finite),
        )
    )
)
def test_round_trip_is_exact(tmp_path_factory, data):
    m, X, y = data
    P = Panel(tuple(f"id{i}" for i in range(m)), X, y)
    path = tmp_path_factory.mktemp("rt") / "p.csv"
    write_panel(P, path)
    Q = read_panel(path)
    assert Q.equals(P)
    # bitwise, including the sign of zero
    assert Q.X.tobytes() == P.X.tobytes() and Q.y.tobytes() == P.y.tobytes()


def test_panel_validation():
    with pytest.raises(ParseError):
        Panel(("a",), np.full((1, 1, 1), np.nan), np.zeros((1, 1)))
    with pytest.raises(BalanceError):
        Panel(("a",), np.zeros((1, 2, 1)), np.zeros((1, 3)))
    with pytest.raises(EmptyPanelError):
        Panel((), np.zeros((0, 2, 1)), np.zeros((0, 2)))
    with pytest.raises(ValueError):
        Panel(("a", "b"), np.zeros((1, 1, 1)), np.zeros((1, 1)))


def test_panel_is_read_only_and_take_preserves_order():
    P = Panel((1, 2, 3), np.arange(6.0).reshape(3, 2, 1), np.arange(6.0).reshape(3, 2))
    assert P.ids == ("1", "2", "3")
    with pytest.raises(ValueError):
        P.X[0, 0, 0] = 1.0
    Q = P.take([2, 0, 2])
    assert Q.ids == ("3", "1", "3")
    np.testing.assert_array_equal(Q.y[:, 0], [4, 0, 4])
    with pytest.raises(ValueError):
        Q.y[0, 0] = 1.0


def test_from_subjects():
    subs = [Subject("a", np.ones((2, 1)), np.zeros(2)), Subject("b", np.ones((3, 1)), np.zeros(3))]
    with pytest.raises(BalanceError) as exc:
        Panel.from_subjects(subs)
    assert exc.value.subject_id == "b"
    P = Panel.from_subjects(subs[:1])
    assert [s.id for s in P] == ["a"]
