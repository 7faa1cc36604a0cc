"""Synthetic rallies, bias layers, and estimator evaluation harness."""

from __future__ import annotations

import json

import numpy as np
import pytest

from photocensus.census import CHAPMAN, LINCOLN_PETERSEN
from photocensus.errors import ConfigError
from photocensus.records import Dataset, ingest
from photocensus.simulate import (
    SIM_CSV_HEADER,
    BiasLayerConfig,
    PhotoCountModel,
    PlatformFilter,
    Region,
    SamplingProcess,
    SimResult,
    apply_bias_layers,
    evaluate_estimator,
    generate_population,
    load_scenario,
    oracle_partition,
    scenario_from_dict,
    sim_result_csv_row,
    sim_result_to_dict,
    simulate_rally,
)


# --- population -------------------------------------------------------------------

class TestGeneratePopulation:
    def test_single_individual(self):
        pop = generate_population(true_n=1, seed=0)
        assert pop.true_n == 1
        assert len(pop.individuals) == 1

    def test_same_seed_reproduces_the_population(self):
        a = generate_population(true_n=20, seed=5)
        b = generate_population(true_n=20, seed=5)
        for x, y in zip(a.individuals, b.individuals):
            assert np.array_equal(x.mean_embedding, y.mean_embedding)
            assert (x.lat, x.lon) == (y.lat, y.lon)

    def test_different_seeds_differ(self):
        a = generate_population(true_n=5, seed=1)
        b = generate_population(true_n=5, seed=2)
        assert not np.array_equal(a.individuals[0].mean_embedding, b.individuals[0].mean_embedding)

    def test_mean_embeddings_are_unit_norm_and_separated(self):
        pop = generate_population(true_n=500, embedding_dim=64, seed=11)
        matrix = np.stack([ind.mean_embedding for ind in pop.individuals])
        norms = np.linalg.norm(matrix, axis=1)
        np.testing.assert_allclose(norms, 1.0, rtol=1e-12)
        sims = matrix @ matrix.T
        np.fill_diagonal(sims, -1.0)
        assert sims.max() < 0.9

    def test_homes_stay_inside_the_region(self):
        region = Region(lat_min=-2.0, lat_max=-1.0, lon_min=35.0, lon_max=36.0)
        pop = generate_population(true_n=50, region=region, seed=3)
        for ind in pop.individuals:
            assert region.lat_min <= ind.lat <= region.lat_max
            assert region.lon_min <= ind.lon <= region.lon_max

    def test_bad_parameters_are_rejected(self):
        with pytest.raises(ConfigError):
            generate_population(true_n=0)
        with pytest.raises(ConfigError):
            generate_population(true_n=5, embedding_dim=1)


def test_region_road_runs_through_the_middle():
    region = Region(lat_min=0.0, lat_max=2.0)
    assert region.road_lat == 1.0
    assert region.road_distance(1.0) == 0.0
    assert region.road_distance(0.0) == 0.5
    assert region.road_distance(2.0) == 0.5


class TestPhotoCountModel:
    def test_fixed_model_is_constant(self):
        rng = np.random.default_rng(0)
        assert PhotoCountModel("fixed", 3).sample(rng, 5).tolist() == [3] * 5

    def test_geometric_model_matches_its_mean(self):
        rng = np.random.default_rng(0)
        draws = PhotoCountModel("geometric", 4.0).sample(rng, 20000)
        assert draws.min() >= 1
        assert abs(draws.mean() - 4.0) < 0.15

    def test_bad_models_are_rejected(self):
        with pytest.raises(ConfigError):
            PhotoCountModel("fixed", 1.5)
        with pytest.raises(ConfigError):
            PhotoCountModel("poisson", 2)


# --- simulate_rally -----------------------------------------------------------------

class TestSimulateRally:
    def test_certain_capture_photographs_everyone_every_occasion(self):
        pop = generate_population(true_n=30, seed=0)
        sample = simulate_rally(pop, SamplingProcess(capture_prob=1.0), seed=1)
        for occ in range(2):
            seen = {i for a, i in sample.truth.items() if sample.occasions[a] == occ}
            assert seen == set(range(30))

    def test_zero_capture_yields_nothing(self):
        pop = generate_population(true_n=30, seed=0)
        sample = simulate_rally(pop, SamplingProcess(capture_prob=0.0), seed=1)
        assert sample.records == []

    def test_same_seed_is_bit_identical(self):
        pop = generate_population(true_n=40, seed=0)
        process = SamplingProcess(capture_prob=0.5, embedding_noise_sd=0.05)
        a = simulate_rally(pop, process, seed=9)
        b = simulate_rally(pop, process, seed=9)
        assert a.records == b.records
        assert a.truth == b.truth and a.occasions == b.occasions

    def test_records_ingest_cleanly(self):
        pop = generate_population(true_n=20, embedding_dim=16, seed=0)
        sample = simulate_rally(pop, SamplingProcess(capture_prob=0.8), seed=2)
        dataset = Dataset(embedding_dim=16)
        report = ingest(dataset, sample.records)
        assert report.rejected == 0 and report.duplicates_skipped == 0
        assert report.accepted == len(sample.records)

    def test_occasions_land_on_distinct_utc_days(self):
        pop = generate_population(true_n=10, seed=0)
        sample = simulate_rally(pop, SamplingProcess(capture_prob=1.0, occasions=3), seed=2)
        by_record = {r.photo_id: r.timestamp.date() for r in sample.records}
        dates = {occ: by_record[a.split("#")[0]] for a, occ in sample.occasions.items()}
        assert len(set(dates.values())) == 3

    def test_noise_perturbs_but_renormalizes(self):
        pop = generate_population(true_n=5, seed=0)
        noisy = simulate_rally(pop, SamplingProcess(capture_prob=1.0, embedding_noise_sd=0.1), seed=3)
        for record in noisy.records:
            emb = record.annotations[0].embedding
            assert np.linalg.norm(emb) == pytest.approx(1.0, rel=1e-9)
            i = noisy.truth[f"{record.photo_id}#0"]
            assert not np.array_equal(emb, pop.individuals[i].mean_embedding)

    def test_zero_noise_reuses_the_mean_embedding(self):
        pop = generate_population(true_n=5, seed=0)
        sample = simulate_rally(pop, SamplingProcess(capture_prob=1.0), seed=3)
        for record in sample.records:
            i = sample.truth[f"{record.photo_id}#0"]
            assert np.array_equal(record.annotations[0].embedding, pop.individuals[i].mean_embedding)

    def test_mean_first_occasion_roster_matches_binomial_mean(self):
        # 500 individuals at p=0.3: the run-averaged day-0 roster is binomial
        # with mean 150 and a run-mean standard error near 0.32
        pop = generate_population(true_n=500, seed=0)
        process = SamplingProcess(capture_prob=0.3)
        rosters = []
        for s in range(1000):
            sample = simulate_rally(pop, process, seed=s)
            rosters.append(
                len({i for a, i in sample.truth.items() if sample.occasions[a] == 0})
            )
        assert abs(np.mean(rosters) - 150.0) <= 2.0

    def test_photo_count_model_multiplies_records(self):
        pop = generate_population(true_n=10, seed=0)
        process = SamplingProcess(
            capture_prob=1.0, photos_per_detection=PhotoCountModel("fixed", 3)
        )
        sample = simulate_rally(pop, process, seed=4)
        assert len(sample.records) == 10 * 2 * 3

    def test_fatigue_reduces_expected_output(self):
        pop = generate_population(true_n=200, seed=0)
        base = SamplingProcess(capture_prob=0.8, photographer_count=2)
        tired = SamplingProcess(capture_prob=0.8, photographer_count=2, fatigue_rate=0.05)
        fresh_count = np.mean(
            [len(simulate_rally(pop, base, seed=s).records) for s in range(20)]
        )
        tired_count = np.mean(
            [len(simulate_rally(pop, tired, seed=s).records) for s in range(20)]
        )
        assert tired_count < fresh_count

    def test_spatial_bias_favours_the_road(self):
        region = Region()
        pop = generate_population(true_n=400, region=region, seed=1)
        process = SamplingProcess(capture_prob=0.9, spatial_bias_sharpness=8.0)
        near = far = near_seen = far_seen = 0
        for ind in pop.individuals:
            if region.road_distance(ind.lat) < 0.1:
                near += 1
            elif region.road_distance(ind.lat) > 0.35:
                far += 1
        for s in range(10):
            sample = simulate_rally(pop, process, seed=s)
            seen = {i for i in sample.truth.values()}
            for i in seen:
                d = region.road_distance(pop.individuals[i].lat)
                if d < 0.1:
                    near_seen += 1
                elif d > 0.35:
                    far_seen += 1
        assert near_seen / (10 * near) > far_seen / (10 * far)

    def test_species_weights_shift_detection_rates(self):
        pop_a = generate_population(true_n=150, seed=2, species="zebra")
        layers = BiasLayerConfig(photographing_bias={"zebra": 0.2, "giraffe": 1.0})
        plain = np.mean(
            [
                len(simulate_rally(pop_a, SamplingProcess(capture_prob=0.8), seed=s).records)
                for s in range(10)
            ]
        )
        weighted = np.mean(
            [
                len(
                    simulate_rally(
                        pop_a, SamplingProcess(capture_prob=0.8), seed=s, layers=layers
                    ).records
                )
                for s in range(10)
            ]
        )
        assert weighted < plain * 0.5


# --- bias layers ------------------------------------------------------------------

class TestApplyBiasLayers:
    def sample(self, n=2000):
        pop = generate_population(true_n=n, seed=0)
        return simulate_rally(pop, SamplingProcess(capture_prob=1.0, occasions=1), seed=1)

    def test_identity_layer_keeps_everything(self):
        records = self.sample(100).records
        kept = apply_bias_layers(records, BiasLayerConfig(sharing_prob=1.0), seed=0)
        assert kept == records

    def test_zero_sharing_drops_everything(self):
        records = self.sample(100).records
        assert apply_bias_layers(records, BiasLayerConfig(sharing_prob=0.0), seed=0) == []

    def test_half_sharing_keeps_about_half(self):
        records = self.sample(5000).records
        kept = apply_bias_layers(records, BiasLayerConfig(sharing_prob=0.5), seed=0)
        # binomial(5000, 0.5) stays within +-4 sd with overwhelming probability
        assert 2359 <= len(kept) <= 2641

    def test_thinning_is_deterministic(self):
        records = self.sample(500).records
        layers = BiasLayerConfig(sharing_prob=0.5)
        assert apply_bias_layers(records, layers, seed=7) == apply_bias_layers(
            records, layers, seed=7
        )

    def test_platform_filter_composes_with_thinning(self):
        records = self.sample(200).records
        layers = BiasLayerConfig(
            sharing_prob=1.0, platform_filter=PlatformFilter("species_allow", species=("lion",))
        )
        assert apply_bias_layers(records, layers, seed=0) == []

    def test_min_quality_filter(self):
        records = self.sample(50).records
        keep_all = BiasLayerConfig(platform_filter=PlatformFilter("min_quality", threshold=0.5))
        drop_all = BiasLayerConfig(platform_filter=PlatformFilter("min_quality", threshold=0.95))
        assert apply_bias_layers(records, keep_all, seed=0) == records
        assert apply_bias_layers(records, drop_all, seed=0) == []

    def test_bad_configs_are_rejected(self):
        with pytest.raises(ConfigError):
            BiasLayerConfig(sharing_prob=1.5)
        with pytest.raises(ConfigError):
            BiasLayerConfig(photographing_bias={"zebra": 0.0})
        with pytest.raises(ConfigError):
            PlatformFilter("by_phase_of_moon")


def test_oracle_partition_groups_by_true_identity():
    truth = {"p1#0": 0, "p2#0": 0, "p3#0": 1}
    partition = oracle_partition(truth)
    assert partition.assignment == {"p1#0": "p1#0", "p2#0": "p1#0", "p3#0": "p3#0"}


# --- evaluate_estimator ----------------------------------------------------------------

class TestEvaluateEstimator:
    def test_certain_capture_recovers_the_population_exactly(self):
        pop = generate_population(true_n=80, seed=0)
        result = evaluate_estimator(
            pop, SamplingProcess(capture_prob=1.0), None, estimator=CHAPMAN, runs=5, seed=1
        )
        assert result.bias == 0.0
        assert result.rmse == 0.0
        assert result.ci_coverage == 1.0
        assert result.failures == 0

    def test_same_seed_is_reproducible(self):
        pop = generate_population(true_n=100, seed=0)
        process = SamplingProcess(capture_prob=0.4)
        a = evaluate_estimator(pop, process, None, runs=50, seed=3)
        b = evaluate_estimator(pop, process, None, runs=50, seed=3)
        assert a == b

    def test_lincoln_petersen_failures_are_counted_not_raised(self):
        # tiny population and low capture make zero-overlap runs common
        pop = generate_population(true_n=3, seed=0)
        process = SamplingProcess(capture_prob=0.25)
        result = evaluate_estimator(
            pop, process, None, estimator=LINCOLN_PETERSEN, runs=200, seed=4
        )
        assert result.failures > 0
        assert result.runs == 200

    def test_lincoln_petersen_reports_no_coverage(self):
        pop = generate_population(true_n=50, seed=0)
        result = evaluate_estimator(
            pop, SamplingProcess(capture_prob=0.9), None, estimator=LINCOLN_PETERSEN,
            runs=10, seed=5,
        )
        assert result.ci_coverage is None

    def test_graph_clustering_mode_runs_end_to_end(self):
        pop = generate_population(true_n=25, seed=0)
        process = SamplingProcess(capture_prob=0.9, embedding_noise_sd=0.05)
        result = evaluate_estimator(
            pop, process, None, runs=5, seed=6, clustering="graph", match_threshold=0.8
        )
        assert result.failures == 0
        assert abs(result.bias) < 10

    def test_unknown_clustering_mode_is_rejected(self):
        pop = generate_population(true_n=5, seed=0)
        with pytest.raises(ConfigError):
            evaluate_estimator(pop, SamplingProcess(capture_prob=1.0), None, clustering="psychic")

    def test_thinning_runs_through_the_layer_stack(self):
        pop = generate_population(true_n=200, seed=0)
        process = SamplingProcess(capture_prob=0.5)
        unthinned = evaluate_estimator(pop, process, None, runs=50, seed=7)
        thinned = evaluate_estimator(
            pop, process, BiasLayerConfig(sharing_prob=0.5), runs=50, seed=7
        )
        assert thinned.rmse > unthinned.rmse


# --- scenario files ----------------------------------------------------------------------

SCENARIO = {
    "population": {"true_n": 40, "embedding_dim": 16, "seed": 3},
    "process": {
        "capture_prob": 0.7,
        "occasions": 2,
        "photos_per_detection": {"kind": "fixed", "value": 2},
        "embedding_noise_sd": 0.05,
    },
    "layers": {
        "sharing_prob": 0.8,
        "platform_filter": {"kind": "min_quality", "threshold": 0.5},
    },
    "estimator": "chapman",
    "runs": 12,
    "clustering": "oracle",
}


class TestScenarioFiles:
    def test_fields_map_onto_the_config_types(self):
        scenario = scenario_from_dict(SCENARIO)
        assert scenario.population.true_n == 40
        assert scenario.process.capture_prob == 0.7
        assert scenario.process.photos_per_detection == PhotoCountModel("fixed", 2)
        assert scenario.layers.sharing_prob == 0.8
        assert scenario.layers.platform_filter.kind == "min_quality"
        assert scenario.runs == 12

    def test_layers_are_optional(self):
        scenario = scenario_from_dict(
            {"population": {"true_n": 5}, "process": {"capture_prob": 1.0}}
        )
        assert scenario.layers is None
        assert scenario.estimator == CHAPMAN

    def test_population_seed_falls_back_to_the_run_seed(self):
        scenario = scenario_from_dict(
            {"population": {"true_n": 5}, "process": {"capture_prob": 1.0}}
        )
        a = scenario.build_population(fallback_seed=9)
        b = generate_population(true_n=5, seed=9)
        assert np.array_equal(a.individuals[0].mean_embedding, b.individuals[0].mean_embedding)

    def test_load_scenario_round_trip(self, tmp_path):
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(SCENARIO), encoding="utf-8")
        scenario = load_scenario(path)
        assert scenario == scenario_from_dict(SCENARIO)

    def test_malformed_scenarios_are_config_errors(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_scenario(path)
        with pytest.raises(ConfigError):
            scenario_from_dict({"process": {"capture_prob": 1.0}})
        with pytest.raises(ConfigError):
            scenario_from_dict({"population": {"true_n": 5}, "process": {"volume": 11}})


# --- result serialization ------------------------------------------------------------------

class TestResultSerialization:
    RESULT = SimResult(
        runs=100, failures=2, mean_estimate=501.25, bias=1.25, rmse=53.0914, ci_coverage=0.934
    )

    def test_dict_shape(self):
        payload = sim_result_to_dict(self.RESULT)
        assert payload == {
            "runs": 100,
            "failures": 2,
            "mean_estimate": 501.25,
            "bias": 1.25,
            "rmse": 53.0914,
            "ci_coverage": 0.934,
        }

    def test_csv_row(self):
        assert SIM_CSV_HEADER == "runs,failures,mean_estimate,bias,rmse,ci_coverage"
        assert sim_result_csv_row(self.RESULT) == "100,2,501.2500,1.2500,53.0914,0.9340"

    def test_csv_row_without_coverage(self):
        result = SimResult(
            runs=10, failures=0, mean_estimate=5.0, bias=0.0, rmse=1.0, ci_coverage=None
        )
        assert sim_result_csv_row(result).endswith(",")
