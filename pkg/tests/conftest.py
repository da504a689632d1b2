import random

import pytest

from pedfuzzy.dataset import MetaDataset
from pedfuzzy.features import PedestrianSample
from pedfuzzy.fuzzy import CrossingLabel

CROSSING = CrossingLabel.CROSSING
NOT_CROSSING = CrossingLabel.NOT_CROSSING


def make_sample(label=NOT_CROSSING, video="v1", ped="p1", frame=0, event=None, behavioral=True,
                dataset="JAAD", **features):
    base = {
        "body_orientation": 90.0,
        "gaze": "looking",
        "action": "walk",
        "proximity": "near",
        "zebra_crossing": "present",
        "distance": 10.0,
    }
    base.update(features)
    return PedestrianSample(base, CrossingLabel(label), dataset, video, ped, frame, event, behavioral)


def random_dataset(rng: random.Random, n_videos=4, max_peds=3, max_frames=150, tag="JAAD"):
    """Pedestrian tracks with frame runs; crossers get an event frame."""
    samples = []
    for v in range(n_videos):
        for p in range(rng.randint(1, max_peds)):
            crossing = rng.random() < 0.5
            frames = rng.randint(1, max_frames)
            event = rng.randint(0, frames) if crossing else None
            behavioral = rng.random() < 0.7
            for f in range(frames):
                samples.append(make_sample(int(crossing), f"vid{v:02d}", f"p{p}", f, event, behavioral, tag,
                                           distance=rng.uniform(0, 40),
                                           gaze=rng.choice(["looking", "not_looking"])))
    return MetaDataset(tuple(samples), source=tag)


# --------------------------------------------------------------------------
# acceptance reporting: one PASS/FAIL line per criterion
# --------------------------------------------------------------------------

_criteria: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion checked by this test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    name = report.user_properties and dict(report.user_properties).get("criterion")
    if name:
        _criteria[name] = "PASS" if report.outcome == "passed" else "FAIL"


@pytest.fixture(autouse=True)
def _record_criterion(request):
    marker = request.node.get_closest_marker("criterion")
    if marker:
        request.node.user_properties.append(("criterion", marker.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _criteria.items():
        terminalreporter.write_line(f"{outcome}: {name}")
