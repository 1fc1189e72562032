import numpy as np
import pytest

from swfopt import data


def line(age="30", label="1", **override):
    fields = ["A11", "6", "A34", "A43", "1169", "A65", "A75", "4", "A93", "A101", "4",
              "A121", age, "A143", "A152", "2", "A173", "1", "A192", "A201", label]
    for k, v in override.items():
        fields[int(k[1:])] = v
    return " ".join(fields)


# --- parsing ----------------------------------------------------------------

def test_dataset_facts(records):
    facts = data.dataset_facts(records)
    assert facts["records"] == 1000
    assert facts["young_count"] == 548 and facts["old_count"] == 452
    assert facts["young_positive_share"] == pytest.approx(0.65, abs=0.01)
    assert facts["old_positive_share"] == pytest.approx(0.76, abs=0.01)


def test_serialize_round_trip(records, dataset_path):
    text = data.serialize_records(records)
    assert data.parse_lines(text.splitlines()) == records
    assert text == dataset_path.read_text()


@pytest.mark.parametrize("age,group", [("34", "young"), ("35", "old"), ("75", "old"), ("19", "young")])
def test_age_boundary(age, group):
    (rec,) = data.parse_lines([line(age=age)], expected=None)
    assert rec.group == group


def test_labels_map_to_signs():
    recs = data.parse_lines([line(label="1"), line(label="2")], expected=None)
    assert [r.label for r in recs] == [1, -1]


@pytest.mark.parametrize("bad,field", [
    (line(label="3"), 21),
    (line(f1="six"), 2),
    (line(age="0"), 13),
    (line(age="x"), 13),
])
def test_malformed_fields_name_line_and_field(bad, field):
    with pytest.raises(data.MalformedLineError) as err:
        data.parse_lines([line(), bad], expected=None)
    assert err.value.line_no == 2 and err.value.field_no == field
    assert f"line 2, field {field}" in str(err.value)


def test_wrong_field_count():
    with pytest.raises(data.MalformedLineError, match="line 1: expected 21 fields"):
        data.parse_lines([line() + " extra"], expected=None)


def test_wrong_record_count():
    with pytest.raises(data.WrongRecordCountError):
        data.parse_lines([line()] * 3)


def test_blank_lines_skipped():
    assert len(data.parse_lines(["", line(), "  "], expected=None)) == 1


def test_unknown_category_code():
    recs = data.parse_lines([line(f0="A19")], expected=None)
    with pytest.raises(data.UnknownCategoryCodeError):
        data.encode(recs)


# --- encoding ---------------------------------------------------------------

def test_encoding_shape_and_one_hot(records):
    enc = data.encode(records)
    assert enc.X.shape == (1000, len(enc.feature_names))
    assert enc.feature_names[0] == "intercept" and np.all(enc.X[:, 0] == 1)
    for j in data.CATEGORICAL:
        name = data.ATTRIBUTES[j][0]
        cols = [k for k, f in enumerate(enc.feature_names) if f.startswith(name + "=")]
        block = enc.X[:, cols]
        assert set(np.unique(block)) <= {0.0, 1.0}
        assert np.all(block.sum(axis=1) == 1)


def test_standardization_on_training_rows(records):
    train = np.arange(0, 1000, 2)
    enc = data.encode(records, train)
    num_cols = [k for k, f in enumerate(enc.feature_names) if k > 0 and "=" not in f]
    assert len(num_cols) == len(data.NUMERIC)
    sub = enc.X[train][:, num_cols]
    assert np.allclose(sub.mean(axis=0), 0, atol=1e-10)
    assert np.allclose(sub.std(axis=0), 1, atol=1e-10)


def test_test_rows_do_not_influence_encoding(records):
    plan = data.make_split(len(records), seed=3)
    a = data.fit_encoder(records, plan.train_idx)
    # scramble every test row's numeric fields; the fitted statistics must not move
    mutated = list(records)
    for i in plan.test_idx:
        attrs = list(mutated[i].attributes)
        for j in data.NUMERIC:
            attrs[j] = "999"
        mutated[i] = data.CreditRecord(tuple(attrs), mutated[i].label)
    b = data.fit_encoder(mutated, plan.train_idx)
    assert np.array_equal(a.means, b.means) and np.array_equal(a.stds, b.stds)


def test_encoded_csv(tmp_path, records):
    enc = data.encode(records[:5])
    path = tmp_path / "enc.csv"
    data.write_encoded_csv(path, enc, ["hello"])
    lines = path.read_text().splitlines()
    assert lines[0] == "# hello"
    assert lines[1].split(",")[0] == "intercept" and lines[1].endswith("label,group")
    back = np.array([[float(v) for v in row.split(",")[:-2]] for row in lines[2:]])
    assert np.array_equal(back, enc.X)


# --- splits -----------------------------------------------------------------

def test_split_sizes_and_disjointness():
    for plan in data.make_splits(1000, n_splits=5):
        assert plan.train_idx.size == 800 and plan.test_idx.size == 200
        assert np.intersect1d(plan.train_idx, plan.test_idx).size == 0
        assert np.array_equal(np.union1d(plan.train_idx, plan.test_idx), np.arange(1000))
        assert plan.requests.size == 200
        assert np.all((plan.requests >= 0) & (plan.requests <= 100))
        assert plan.budget == 5000.0


def test_split_determinism_and_seeds():
    a = data.make_splits(1000, n_splits=3, seed_base=7)
    b = data.make_splits(1000, n_splits=3, seed_base=7)
    assert a == b
    assert [p.seed for p in a] == [7, 8, 9]
    assert a[0] != a[1]


def test_split_plan_text_round_trip():
    plan = data.make_split(1000, seed=11)
    assert data.SplitPlan.from_text(plan.to_text()) == plan
    with pytest.raises(data.DataError):
        data.SplitPlan.from_text("something else\n")
