import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from truncscore.data import (
    Dataset,
    LandmarkSpec,
    SubjectRecord,
    read_csv,
    validate_for_estimation,
    write_csv,
)
from truncscore.exceptions import ParseError, SchemaError, ValidationError

HEADER = "a,x1,x2,y,time,r,status\n"


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def small():
    return Dataset(
        a=[0, 0, 1, 1], x1=[40.0, 50.0, 45.0, 55.0], x2=[0, 1, 0, 1],
        time=[3.0, 1.0, 2.5, 0.5], status=[0, 1, 0, 2], r=[1, 0, 1, 0],
        y=[41.0, np.nan, 44.5, np.nan],
    )


class TestReadCsv:
    def test_direct_field_mapping(self, tmp_path):
        d = read_csv(write(tmp_path, HEADER + "1,46.2,0,48.4,3.55,1,0\n1,40,1,NA,1.0,0,1\n"))
        rec = next(d.records())
        assert rec == SubjectRecord(a=1, x1=46.2, x2=0, time=3.55, status=0, r=1, y=48.4)

    @pytest.mark.parametrize("token", ["NA", "na", "", "NaN"])
    def test_absent_score(self, tmp_path, token):
        d = read_csv(write(tmp_path, HEADER + f"1,46.2,0,48.4,3.55,1,0\n0,40,1,{token},1.0,0,1\n"))
        assert list(d.records())[1].y is None

    def test_observed_flag_without_score(self, tmp_path):
        with pytest.raises(ValidationError) as err:
            read_csv(write(tmp_path, HEADER + "1,46.2,0,48.4,3.55,1,0\n0,40,1,NA,3.0,1,0\n"))
        assert err.value.row == 2

    def test_bad_number_reports_row(self, tmp_path):
        with pytest.raises(ParseError) as err:
            read_csv(write(tmp_path, HEADER + "1,46.2,0,48.4,3.55,1,0\n0,abc,1,NA,3.0,0,0\n"))
        assert err.value.row == 2

    def test_non_integer_code(self, tmp_path):
        with pytest.raises(ParseError):
            read_csv(write(tmp_path, HEADER + "1,46.2,0,48.4,3.55,1,0.5\n0,40,1,NA,1.0,0,1\n"))

    def test_invalid_code_reports_row(self, tmp_path):
        with pytest.raises(ValidationError) as err:
            read_csv(write(tmp_path, HEADER + "1,46.2,0,48.4,3.55,1,0\n2,40,1,NA,1.0,0,1\n"))
        assert err.value.row == 2

    def test_missing_column(self, tmp_path):
        with pytest.raises(SchemaError):
            read_csv(write(tmp_path, "a,x1,x2,y,time,r\n1,2,0,1,1,1\n"))

    def test_empty_file(self, tmp_path):
        with pytest.raises(SchemaError):
            read_csv(write(tmp_path, ""))

    def test_schema_mapping(self, tmp_path):
        text = "trt,age,sex,score,t,obs,st\n1,46.2,0,48.4,3.55,1,0\n0,40,1,NA,1.0,0,1\n"
        schema = {"a": "trt", "x1": "age", "x2": "sex", "y": "score", "time": "t", "r": "obs", "status": "st"}
        d = read_csv(write(tmp_path, text), schema)
        assert d.n == 2 and d.a[0] == 1 and d.status[1] == 1

    def test_unknown_schema_key(self, tmp_path):
        with pytest.raises(SchemaError):
            read_csv(write(tmp_path, HEADER), {"bogus": "x"})


class TestRoundTrip:
    def test_identity(self, tmp_path):
        d = small()
        write_csv(d, tmp_path / "out.csv")
        assert read_csv(tmp_path / "out.csv").equals(d)

    def test_simulated_identity(self, tmp_path, table1_data):
        write_csv(table1_data, tmp_path / "sim.csv")
        assert read_csv(tmp_path / "sim.csv").equals(table1_data)

    @given(st.lists(st.tuples(st.integers(0, 1), st.floats(-1e6, 1e6), st.integers(0, 1),
                              st.floats(0, 1e3), st.integers(0, 3), st.booleans(), st.floats(-1e3, 1e3)),
                    min_size=2, max_size=30))
    @settings(max_examples=50, deadline=None)
    def test_property(self, tmp_path_factory, rows):
        d = Dataset(a=[r[0] for r in rows], x1=[r[1] for r in rows], x2=[r[2] for r in rows],
                    time=[r[3] for r in rows], status=[r[4] for r in rows], r=[int(r[5]) for r in rows],
                    y=[r[6] if r[5] else np.nan for r in rows])
        path = tmp_path_factory.mktemp("rt") / "d.csv"
        write_csv(d, path)
        assert read_csv(path).equals(d)


class TestDataset:
    def test_immutable(self):
        d = small()
        with pytest.raises(ValueError):
            d.y[0] = 1.0

    def test_records_roundtrip(self):
        d = small()
        assert Dataset.from_records(d.records()).equals(d)

    def test_relabel(self):
        d = small()
        np.testing.assert_array_equal(d.relabel_arms().a, 1 - d.a)

    def test_event_collapses_causes(self):
        np.testing.assert_array_equal(small().event, [0, 1, 0, 1])

    @pytest.mark.parametrize("field,value", [("time", -1.0), ("status", -1), ("x2", 2), ("r", 3)])
    def test_invariants(self, field, value):
        cols = {k: list(getattr(small(), k)) for k in ("a", "x1", "x2", "time", "status", "r", "y")}
        cols[field][1] = value
        with pytest.raises(ValidationError) as err:
            Dataset(**cols)
        assert err.value.row == 2

    def test_too_small(self):
        with pytest.raises(ValidationError):
            Dataset(a=[0], x1=[1.0], x2=[0], time=[1.0], status=[0], r=[0], y=[np.nan])


class TestDiagnostics:
    def test_clean(self):
        d = Dataset(a=[0, 0, 1, 1], x1=[1.0] * 4, x2=[0] * 4, time=[3.0, 1.0, 3.0, 1.0],
                    status=[0, 1, 0, 1], r=[1, 0, 1, 0], y=[1.0, np.nan, 2.0, np.nan])
        diag = validate_for_estimation(d, LandmarkSpec(2.0))
        assert diag.flags == [] and diag.ok
        assert diag.at_risk_tau == {0: 1, 1: 1}

    def test_no_observed_scores(self):
        d = Dataset(a=[0, 0, 1, 1], x1=[1.0] * 4, x2=[0] * 4, time=[3.0, 1.0, 3.0, 1.0],
                    status=[0, 1, 0, 1], r=[1, 0, 0, 0], y=[1.0, np.nan, np.nan, np.nan])
        diag = validate_for_estimation(d, LandmarkSpec(2.0))
        codes = {(f["code"], f.get("arm")) for f in diag.flags if f["severity"] == "error"}
        assert ("positivity-score", 1) in codes and not diag.ok

    def test_observed_before_landmark(self):
        d = Dataset(a=[0, 0, 1, 1], x1=[1.0] * 4, x2=[0] * 4, time=[3.0, 1.0, 3.0, 1.0],
                    status=[0, 0, 0, 1], r=[1, 1, 1, 0], y=[1.0, 3.0, 2.0, np.nan])
        diag = validate_for_estimation(d, LandmarkSpec(2.0))
        flag = next(f for f in diag.flags if f["code"] == "observed-before-tau")
        assert flag["rows"] == [2] and flag["severity"] == "warning"

    def test_landmark_must_be_positive(self):
        with pytest.raises(ValidationError):
            LandmarkSpec(0.0)
