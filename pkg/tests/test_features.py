import pytest
from hypothesis import given, strategies as st

from pedfuzzy.features import (
    ACTION_CLASSES,
    ACTION_VOCABULARY,
    FeatureSchema,
    SampleError,
    SchemaError,
    estimate_distance,
    map_action,
    shift_orientation,
    validate_sample,
)
from pedfuzzy.fuzzy import CrossingLabel


def record(**overrides):
    base = {
        "dataset": "JAAD", "video_id": "video_0001", "pedestrian_id": "p1", "frame_index": "3",
        "crossing_event_frame": "", "behavioral_flag": "1",
        "body_orientation": "10", "gaze": "looking", "action": "Walk", "proximity": "near",
        "zebra_crossing": "present", "distance": "12.5", "label": "0",
    }
    base.update(overrides)
    return base


@pytest.mark.parametrize("phi, expected", [(0, 45), (330, 15), (315, 0), (45, 90), (359.5, 44.5)])
def test_shift_orientation(phi, expected):
    assert shift_orientation(phi) == expected


def test_right_facing_band_becomes_contiguous():
    # the band 315..360 and 0..45 maps onto 0..90
    assert all(0 <= shift_orientation(p) <= 90 for p in list(range(315, 360)) + list(range(0, 46)))


def test_shift_orientation_rejects_nan():
    with pytest.raises(ValueError):
        shift_orientation(float("nan"))


def test_estimate_distance_values():
    assert estimate_distance(1, 100, 100) == 1.0
    assert estimate_distance(0.5, 1000, 50) == 10.0


@given(st.floats(0.1, 3), st.floats(100, 3000), st.floats(1, 500))
def test_halving_pixel_width_doubles_distance(w, f, p):
    assert estimate_distance(w, f, p / 2) == pytest.approx(2 * estimate_distance(w, f, p), rel=1e-12)


@pytest.mark.parametrize("p", [0, -3])
def test_degenerate_box(p):
    with pytest.raises(ValueError, match="pixel width"):
        estimate_distance(0.5, 1000, p)


@pytest.mark.parametrize("label, cls", [("Jog", 3), ("Turn", 1), ("Kick", 4), ("check watch", 0),
                                        ("POSITION JUMP", 4), ("wave2", 2), ("run", 3), ("2", 2)])
def test_map_action(label, cls):
    assert map_action(label) == cls


def test_map_action_unknown_lists_vocabulary():
    with pytest.raises(ValueError, match="Check-watch"):
        map_action("Moonwalk")


def test_map_action_vocabulary_size():
    assert len(ACTION_VOCABULARY) == 20 and len(ACTION_CLASSES) == 5


def test_default_schema_mask():
    schema = FeatureSchema()
    active = [f.name for f in schema.active]
    assert "motion_ability" not in active and "age" not in active
    assert active == ["body_orientation", "gaze", "action", "proximity", "zebra_crossing", "distance"]
    assert schema["proximity"].domain == ("near", "medium", "far")


def test_schema_needs_an_active_feature():
    with pytest.raises(SchemaError):
        FeatureSchema().with_active([])


def test_schema_text_round_trip(tmp_path):
    schema = FeatureSchema().without("gaze")
    path = tmp_path / "schema.txt"
    path.write_text(schema.to_text())
    assert FeatureSchema.load(path) == schema


def test_schema_missing_file_names_path(tmp_path):
    with pytest.raises(FileNotFoundError, match="nope.txt"):
        FeatureSchema.load(tmp_path / "nope.txt")


def test_schema_bad_line_reports_location():
    with pytest.raises(SchemaError, match=":3"):
        FeatureSchema.from_text("# pedfuzzy-schema 1\n\nx | X | wobbly | 0:1 | yes | |\n")


def test_resolve_bounds_takes_data_max():
    from conftest import make_sample

    schema = FeatureSchema().resolve_bounds([make_sample(distance=3.0), make_sample(distance=42.0)])
    assert schema["distance"].domain == (0.0, 42.0)


def test_valid_record():
    s = validate_sample(record())
    assert s.features["action"] == "walk"
    assert s.features["body_orientation"] == 10.0
    assert s.label is CrossingLabel.NOT_CROSSING and s.behavioral


def test_unshifted_orientation_is_shifted():
    s = validate_sample(record(body_orientation="330"), orientation_shifted=False)
    assert s.features["body_orientation"] == 15.0


def test_medium_proximity_accepted():
    assert validate_sample(record(proximity="medium")).features["proximity"] == "medium"


def test_negative_distance_is_range_error():
    with pytest.raises(SampleError, match="distance"):
        validate_sample(record(distance="-1"), row=7)


def test_missing_label_column_named():
    rec = record()
    del rec["label"]
    with pytest.raises(SampleError, match="label"):
        validate_sample(rec)


def test_all_problems_collected():
    with pytest.raises(SampleError) as info:
        validate_sample(record(gaze="sideways", body_orientation="400", dataset="KITTI"), row=2)
    fields = [f for f, _ in info.value.problems]
    assert set(fields) == {"gaze", "body_orientation", "dataset"}
    assert info.value.row == 2


def test_inactive_features_may_be_blank():
    s = validate_sample(record(age="", motion_ability=""))
    assert "age" not in s.features


def test_behavioral_flag_words():
    assert validate_sample(record(behavioral_flag="irrelevant")).behavioral is False
    with pytest.raises(SampleError):
        validate_sample(record(behavioral_flag="perhaps"))
