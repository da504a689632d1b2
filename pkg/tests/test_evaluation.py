import random

import pytest

from pedfuzzy.dataset import SamplingConfig
from pedfuzzy.evaluation import (
    ConfusionMatrix,
    ExperimentConfig,
    ExperimentPlan,
    ResultRow,
    TestGroupSpec,
    ablation_configs,
    confusion,
    correlate,
    details_csv,
    evaluate,
    f1_score,
    load_plan,
    macro_f1,
    precision,
    randomness_configs,
    recall,
    run_experiment,
    table_csv,
    table_text,
    trace_lines,
)
from pedfuzzy.features import FeatureSchema
from pedfuzzy.fuzzy import CrossingLabel, FisModel, FuzzyRule
from pedfuzzy.mining import uniform_partition
from pedfuzzy.modelfile import load_model, save_model
from pedfuzzy.synthetic import PlantedSpec, default_planted_model, generate

from conftest import make_sample
from oracles import pearson

C, N = CrossingLabel.CROSSING, CrossingLabel.NOT_CROSSING


@pytest.fixture(scope="module")
def synth():
    def make(n, seed, tag="synthetic"):
        return generate(PlantedSpec(default_planted_model(), samples_per_class=n, seed=seed, dataset_tag=tag,
                                    label_noise_rate=0.05))
    return make


def test_confusion_basic():
    assert confusion([1, 0, 1], [1, 0, 1]) == ConfusionMatrix(tp=2, fp=0, fn=0, tn=1)
    assert confusion([1] * 4, [0] * 4).fp == 4


def test_confusion_six_pairs():
    # pairs (pred, label): (1,1) (1,0) (0,0) (0,1) (1,1) (0,0)
    cm = confusion([1, 1, 0, 0, 1, 0], [1, 0, 0, 1, 1, 0])
    assert (cm.tp, cm.fp, cm.fn, cm.tn) == (2, 1, 1, 2)


def test_confusion_rejects_bad_input():
    with pytest.raises(ValueError):
        confusion([1, 0], [1])
    with pytest.raises(ValueError):
        confusion([2], [1])


def test_f1_values():
    assert f1_score(ConfusionMatrix(tp=1)) == 1.0
    assert f1_score(ConfusionMatrix(fp=3)) == 0.0
    assert f1_score(ConfusionMatrix(fn=3)) == 0.0
    assert f1_score(ConfusionMatrix()) == 0.0
    cm = ConfusionMatrix(tp=3, fp=1, fn=2)
    assert precision(cm) == 0.75 and recall(cm) == 0.6
    assert f1_score(cm) == pytest.approx(2 / 3, abs=1e-4)


def test_macro_f1_averages_both_classes():
    cm = ConfusionMatrix(tp=3, fp=1, fn=2, tn=4)
    # negative class: tp'=4, fp'=2, fn'=1 -> 8/11
    assert macro_f1(cm) == pytest.approx((2 / 3 + 8 / 11) / 2)
    assert cm.swapped() == ConfusionMatrix(tp=4, fp=2, fn=1, tn=3)


def _always_abstaining_model():
    x = uniform_partition("distance", 0, 10, ("too near", "near", "far"))
    return FisModel((x,), (FuzzyRule(((0, 0),), C, 1.0, 1),))


def test_abstentions_on_not_crossing_group():
    model = _always_abstaining_model()
    group = [make_sample(N, distance=10.0) for _ in range(5)]
    report = evaluate(model, group)
    assert report.confusion.tn == 5 and report.abstentions == 5
    assert report.recall == 0.0 and report.f1 == 0.0


def test_single_rule_perfect_model():
    model = _always_abstaining_model()
    group = [make_sample(C, distance=0.0)] * 3 + [make_sample(N, distance=10.0)] * 3
    assert evaluate(model, group).f1 == 1.0


def test_reloaded_model_evaluates_identically(tmp_path, synth):
    data = synth(200, 1)
    model = default_planted_model()
    save_model(model, tmp_path / "m.json")
    a = evaluate(model, data, keep_traces=True)
    b = evaluate(load_model(tmp_path / "m.json"), data, keep_traces=True)
    assert a == b and trace_lines(a) == trace_lines(b)


def test_report_tables():
    rows = [ResultRow("J2K", 20, {"JAAD_all": 0.81234, "JAAD_beh": 0.7}),
            ResultRow("J4K", None, {}, "DatasetError: too few")]
    groups = ["JAAD_all", "JAAD_beh", "PIE_all", "PIE_beh"]
    csv_text = table_csv(rows, groups, {"plan": "q"})
    lines = csv_text.splitlines()
    assert lines[0] == "# plan: q"
    assert lines[1] == "Conf,Rules,JAAD_all,JAAD_beh,PIE_all,PIE_beh"
    assert lines[2] == "J2K,20,0.81,0.70,,"
    assert lines[3].startswith("J4K,error")
    text = table_text(rows, groups)
    assert text.splitlines()[0].split()[:2] == ["Conf", "R"] and "! J4K: DatasetError" in text


def test_details_csv_columns(synth):
    data = synth(100, 2)
    rep = evaluate(default_planted_model(), data, "syn_all", "planted", 0)
    head = details_csv([rep]).splitlines()[0].split(",")
    assert head[:5] == ["conf", "group", "rules", "n", "f1"]


def _plan(configs, tests=None):
    return ExperimentPlan("t", "quantity", configs, tests or [TestGroupSpec("S_all", "S", "all"),
                                                              TestGroupSpec("S_beh", "S", "beh")])


def test_quantity_plan_rows_and_isolation(synth):
    sources = {"S": synth(400, 3)}
    configs = [ExperimentConfig(f"S{n}", SamplingConfig(mix=(("S", n),))) for n in (100, 200, 400)]
    configs.append(ExperimentConfig("S5K", SamplingConfig(mix=(("S", 5000),))))
    result = run_experiment(_plan(configs), datasets=sources)
    assert [r.conf for r in result.rows] == ["S100", "S200", "S400", "S5K"]
    assert all(r.error is None for r in result.rows[:3])
    assert result.rows[3].error and "achievable" in result.rows[3].error
    assert result.csv().splitlines()[2] == "Conf,Rules,S_all,S_beh"
    assert result.rows[0].provenance["training_samples"] == 100


def test_runner_writes_models_and_provenance(tmp_path, synth):
    sources = {"S": synth(150, 4)}
    run_experiment(_plan([ExperimentConfig("S100", SamplingConfig(mix=(("S", 100),)))]), sources, tmp_path)
    assert (tmp_path / "models" / "S100.json").exists()
    assert (tmp_path / "provenance" / "S100.json").exists()


def test_ablation_and_randomness_generators():
    base = ExperimentConfig("J14K", SamplingConfig(mix=(("JAAD", 14000),)))
    feats = ["distance", "proximity", "action", "gaze", "body_orientation", "zebra_crossing"]
    names = [c.name for c in ablation_configs(base, feats)]
    assert names == ["J14K", "J14K-NDistance", "J14K-NProximity", "J14K-NAction", "J14K-NAttention",
                     "J14K-NOrientation", "J14K-NZebraCross"]
    rand = randomness_configs(ExperimentConfig("J8K", SamplingConfig(mix=(("JAAD", 8000),))), [11, 12, 13])
    assert [c.name for c in rand] == ["J8K", "J8KR1", "J8KR2", "J8KR3"]
    assert all(c.sampling.ordering == "random" for c in rand[1:])
    assert {c.sampling.mix for c in rand} == {(("JAAD", 8000),)}


def test_load_plan(tmp_path):
    (tmp_path / "plan.ini").write_text(
        "[plan]\nname = abl\nfactor = ablation\nseed = 3\n\n"
        "[sources]\nJAAD = jaad.csv\n\n[tests]\nJAAD_all = JAAD:all\nJAAD_beh = JAAD:beh\n\n"
        "[mining]\nmin_confidence = 0.55\n\n"
        "[config J2K]\ntrain = JAAD:2K\n\n"
        "[ablation]\nbaseline = J2K\nfeatures = distance, gaze\n"
    )
    plan = load_plan(tmp_path / "plan.ini")
    assert [c.name for c in plan.configs] == ["J2K", "J2K-NDistance", "J2K-NAttention"]
    assert plan.configs[0].sampling.seed == 3 and plan.configs[0].mining.min_confidence == 0.55
    assert plan.sources["JAAD"] == tmp_path / "jaad.csv"
    assert [t.group for t in plan.tests] == ["all", "beh"]


def test_load_plan_errors(tmp_path):
    path = tmp_path / "p.ini"
    path.write_text("[plan]\nfactor = quantity\n[config A]\nmin_suport = 0.1\ntrain = X:10\n")
    with pytest.raises(ValueError, match="min_suport"):
        load_plan(path)
    path.write_text("[plan]\nfactor = vibes\n")
    with pytest.raises(ValueError, match="factor"):
        load_plan(path)


def test_correlation_identity_and_hand_fixture():
    same = [make_sample(i % 2, ped=f"p{i}", gaze=["looking", "not_looking"][i % 2]) for i in range(10)]
    only_gaze = FeatureSchema().with_active(["gaze"])
    assert correlate(same, only_gaze)[0].value == pytest.approx(1.0)
    # codes: looking=0, not_looking=1
    xs = [0, 0, 1, 1, 1, 0, 1, 0]
    ys = [0, 0, 1, 1, 0, 0, 1, 1]
    samples = [make_sample(y, ped=f"p{i}", gaze=["looking", "not_looking"][x]) for i, (x, y) in enumerate(zip(xs, ys))]
    assert pearson(xs, ys) == 0.5
    assert correlate(samples, only_gaze)[0].value == pytest.approx(0.5, abs=1e-12)


def test_correlation_constant_and_independent():
    rng = random.Random(0)
    samples = [make_sample(rng.randint(0, 1), ped=f"p{i}", distance=rng.uniform(0, 30)) for i in range(4000)]
    res = {c.feature: c for c in correlate(samples)}
    assert abs(res["distance"].value) < 0.05
    assert res["proximity"].constant and res["proximity"].value == 0.0


def test_plan_inline_comments_and_combined_expansions(tmp_path):
    (tmp_path / "plan.ini").write_text(
        "[plan]\nfactor = ablation   ; sweep kind\n\n[config J2K]\ntrain = JAAD:2K\n\n"
        "[config P2K]\ntrain = PIE:2K\n\n"
        "[ablation]\nbaseline = J2K\nfeatures = gaze\n\n[randomness]\nbaseline = J2K\nseeds = 7, 8\n"
    )
    plan = load_plan(tmp_path / "plan.ini")
    assert plan.factor == "ablation"
    assert [c.name for c in plan.configs] == ["J2K", "J2KR1", "J2KR2", "J2K-NAttention", "P2K"]
    assert [c.sampling.seed for c in plan.configs[1:3]] == [7, 8]
