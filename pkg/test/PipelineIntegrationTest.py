import json
import os
import tempfile
import unittest

import pytest

import main
from pipeline import results
from pipeline.config import ExperimentConfig, load_experiment_config
from pipeline.stages import UNCERTIFIED_BANNER, Pipeline
from travelwave.errors import (EXIT_CONFIGURATION, EXIT_PREREQUISITE, EXIT_SUCCESS, ConfigurationError,
                               MissingPrerequisiteError)

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..")
EXPERIMENTS = os.path.join(ROOT, "experiments")


def experiment(name: str) -> str:
    return os.path.join(EXPERIMENTS, f"{name}.json")


class PipelineTest(unittest.TestCase):
    """
    The test cases of this class run single stages in a temporary output directory.
    """

    def setUp(self) -> None:
        self.tmp = tempfile.TemporaryDirectory()
        self.out = self.tmp.name

    def tearDown(self) -> None:
        self.tmp.cleanup()

    def test_missing_prerequisite(self) -> None:
        """
        Every stage after 'stationary' needs the results of an earlier stage.
        """
        pipeline = Pipeline(load_experiment_config(experiment("nagumo")), self.out)
        for stage in ("orbits", "homology", "report"):
            with self.subTest(stage):
                with self.assertRaises(MissingPrerequisiteError):
                    pipeline.run(stage)

    def test_unknown_stage(self) -> None:
        pipeline = Pipeline(load_experiment_config(experiment("nagumo")), self.out)
        with self.assertRaises(ConfigurationError):
            pipeline.run("plot")

    def test_validate(self) -> None:
        summary = Pipeline(load_experiment_config(experiment("nagumo")), self.out).run("validate")
        self.assertTrue(summary['hypotheses passed'])
        data = results.read_json(os.path.join(self.out, "hypotheses.json"))
        self.assertEqual(data['problem']['name'], "nagumo")
        manifest = results.read_json(os.path.join(self.out, "manifest.json"))
        self.assertIn("hypotheses.json", manifest['files'])
        self.assertIn("validate", manifest['timings'])

    def test_homotopy_validation(self) -> None:
        Pipeline(load_experiment_config(experiment("nagumo_homotopy")), self.out).run("validate")
        data = results.read_json(os.path.join(self.out, "hypotheses.json"))
        self.assertEqual(len(data['homotopy']), 3)

    def test_nagumo_stages(self) -> None:
        pipeline = Pipeline(load_experiment_config(experiment("nagumo")), self.out)
        summary = pipeline.run("stationary")
        self.assertEqual(summary['points'], 3)
        self.assertEqual(summary['morse indices'], [1, 0, 0])

        summary = pipeline.run("orbits")
        self.assertEqual(summary['orbits'], ["o0: z0 -> z1", "o1: z0 -> z2"])
        self.assertTrue(summary['certified'])

        summary = pipeline.run("homology")
        self.assertEqual(summary['summary'], "total rank 1 (grade 0)")
        data = results.read_json(os.path.join(self.out, "homology.json"))
        self.assertTrue(data['d_squared']['passed'])
        self.assertTrue(data['matches_expected'])
        self.assertTrue(data['forcing']['passed'])
        with open(os.path.join(self.out, "homology.txt")) as f:
            text = f.read()
        self.assertNotIn(UNCERTIFIED_BANNER, text)
        self.assertTrue(text.strip().endswith("total rank 1 (grade 0)"))

        with open(os.path.join(self.out, "connection_matrix.csv")) as f:
            lines = f.read().splitlines()
        self.assertEqual(lines, ["source,z0,z1,z2", "z0,0,1,1", "z1,0,0,0", "z2,0,0,0"])

    def test_orbits_round_trip(self) -> None:
        """
        Orbits restored from the output directory carry the same data as the search that wrote them.
        """
        pipeline = Pipeline(load_experiment_config(experiment("nagumo")), self.out)
        pipeline.run("stationary")
        pipeline.run("orbits")
        search, count = pipeline.load_orbits()
        self.assertEqual([orbit.pair for orbit in search], [("z0", "z1"), ("z0", "z2")])
        self.assertEqual([orbit.spectral_flow for orbit in search], [1, 1])
        self.assertEqual(count.mod2("z0", "z1"), 1)
        self.assertTrue(count.certified)

    def test_empty_complex(self) -> None:
        """
        f(u) = u^2 + 1 with Neumann conditions has no stationary solution; the homology vanishes.
        """
        pipeline = Pipeline(load_experiment_config(experiment("neumann_even")), self.out)
        self.assertEqual(pipeline.run("stationary")['points'], 0)
        pipeline.run("orbits")
        summary = pipeline.run("homology")
        self.assertEqual(summary['total'], 0)
        self.assertEqual(summary['summary'], "total rank 0")

    def test_forced_uncertified_banner(self) -> None:
        """
        A forced complex from an uncertified count is marked in every human readable output.
        """
        pipeline = Pipeline(load_experiment_config(experiment("nagumo"), force_uncertified=True), self.out)
        pipeline.run("stationary")
        pipeline.run("orbits")
        data = results.read_json(os.path.join(self.out, "orbits.json"))
        data['search']['certified'] = False
        data['count']['certified'] = False
        results.write_json(os.path.join(self.out, "orbits.json"), data)
        summary = pipeline.run("homology")
        self.assertEqual(summary['summary'], "total rank 1 (grade 0) UNCERTIFIED")
        with open(os.path.join(self.out, "homology.txt")) as f:
            self.assertEqual(f.readline().strip(), UNCERTIFIED_BANNER)


@pytest.mark.slow
class ReproducibilityTest(unittest.TestCase):

    def test_bit_identical_outputs(self) -> None:
        """
        Two runs of the same experiment write identical files; only the stage timings of the manifest differ.
        """
        hashes = []
        for _ in range(2):
            with tempfile.TemporaryDirectory() as out:
                pipeline = Pipeline(load_experiment_config(experiment("nagumo")), out)
                for stage in ("validate", "stationary", "orbits", "homology", "report"):
                    pipeline.run(stage)
                hashes.append(results.read_json(os.path.join(out, "manifest.json"))['files'])
        self.assertEqual(hashes[0], hashes[1])
        self.assertIn("trajectories.npz", hashes[0])
        self.assertIn(os.path.join("report", "energy.svg"), hashes[0])

    def test_inline_problem(self) -> None:
        """
        An experiment may define its problem inline instead of naming a file.
        """
        with open(os.path.join(ROOT, "problems", "nagumo.json")) as f:
            problem = json.load(f)
        config = ExperimentConfig({"schema_version": 1, "name": "inline", "problem": problem})
        with tempfile.TemporaryDirectory() as out:
            self.assertEqual(Pipeline(config, out).run("stationary")['points'], 3)


class CommandLineTest(unittest.TestCase):

    def setUp(self) -> None:
        self.tmp = tempfile.TemporaryDirectory()
        self.out = self.tmp.name

    def tearDown(self) -> None:
        self.tmp.cleanup()

    def arguments(self, verb: str, name: str = "nagumo") -> list:
        return [verb, "--config", experiment(name), "--out", self.out]

    def test_missing_prerequisite_exit_code(self) -> None:
        self.assertEqual(main.main(self.arguments("homology")), EXIT_PREREQUISITE)

    def test_configuration_exit_codes(self) -> None:
        self.assertEqual(main.main(["plot", "--config", experiment("nagumo"), "--out", self.out]),
                         EXIT_CONFIGURATION)
        self.assertEqual(main.main(["stationary", "--out", self.out]), EXIT_CONFIGURATION)
        self.assertEqual(main.main(self.arguments("stationary", "does_not_exist")), EXIT_CONFIGURATION)

    def test_stationary(self) -> None:
        self.assertEqual(main.main(self.arguments("stationary")), EXIT_SUCCESS)
        self.assertTrue(os.path.exists(os.path.join(self.out, "stationary.json")))
        self.assertTrue(os.path.isdir(os.path.join(self.out, "runs")))

    def test_diagnostics(self) -> None:
        text = main.diagnostics(MissingPrerequisiteError("stationary.json not found"), EXIT_PREREQUISITE)
        self.assertEqual(json.loads(text), {'error': "MissingPrerequisiteError", 'message': "stationary.json not found",
                                            'exit_code': EXIT_PREREQUISITE})


if __name__ == '__main__':
    unittest.main()
