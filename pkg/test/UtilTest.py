import json
import os
import tempfile
import unittest

import numpy as np

from util.create_diagrams import create_rank_matrix, to_latex_table
from util.experiments_adapter import ExperimentsAdapter, load_output_dir, read_cout


def write(filename: str, text: str) -> None:
    os.makedirs(os.path.dirname(filename), exist_ok=True)
    with open(filename, 'w') as f:
        f.write(text)


class ExperimentsAdapterTest(unittest.TestCase):

    def setUp(self) -> None:
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = self.tmp.name

    def tearDown(self) -> None:
        self.tmp.cleanup()

    def test_run_order(self) -> None:
        """
        Runs are visited by numeric sacred id; the sources directory is skipped.
        """
        for name in ("2", "10", "1", "_sources"):
            write(os.path.join(self.dir, name, "run.json"), json.dumps({'id': name}))
        names = [os.path.basename(run['filename']) for run in ExperimentsAdapter(self.dir)]
        self.assertEqual(names, ["1", "2", "10"])

    def test_read_cout(self) -> None:
        filename = os.path.join(self.dir, "1", "cout.txt")
        write(filename, "=========================\n"
                        "Running 'homology' for 'nagumo' (nagumo):\n"
                        "=========================\n"
                        "total: 1\n"
                        "=========================\n"
                        "total rank 1 (grade 0) UNCERTIFIED\n")
        info = read_cout(filename)
        self.assertEqual(info['stage'], "homology")
        self.assertEqual(info['total_rank'], 1)
        self.assertFalse(info['certified'])
        self.assertIsNone(info['points'])

    def test_read_missing_cout(self) -> None:
        info = read_cout(os.path.join(self.dir, "missing.txt"))
        self.assertIsNone(info['stage'])

    def test_output_dir(self) -> None:
        write(os.path.join(self.dir, "stationary.json"), json.dumps({'points': []}))
        files = load_output_dir(self.dir)
        self.assertEqual(files['stationary.json'], {'points': []})
        self.assertIsNone(files['homology.json'])


class CreateDiagramsTest(unittest.TestCase):

    def test_rank_matrix(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            first, second, empty = (os.path.join(tmp, name) for name in ("a", "b", "c"))
            write(os.path.join(first, "homology.json"), json.dumps({'homology': {'ranks': {'0': 1, '1': 0}}}))
            write(os.path.join(second, "homology.json"), json.dumps({'homology': {'ranks': {'0': 1, '2': 0}}}))
            os.makedirs(empty)
            matrix, grades = create_rank_matrix([first, second, empty])
        self.assertEqual(grades, [0, 1, 2])
        self.assertTrue(np.array_equal(matrix, [[1, 0, 0], [1, 0, 0], [0, 0, 0]]))

    def test_latex_table(self) -> None:
        table = to_latex_table(np.array([[0, 1], [0, 0]]), ["z0", "z1"], ["z0", "z1"])
        lines = table.splitlines()
        self.assertEqual(lines[1], r"\begin{tabular}{c|cc}")
        self.assertEqual(lines[2], r"  &z0& z1\\")
        self.assertEqual(lines[4], r"  z0 & 0& 1\\")
        self.assertEqual(lines[-1], r"\end{tabular}")


if __name__ == '__main__':
    unittest.main()
