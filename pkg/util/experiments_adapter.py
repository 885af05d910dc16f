import glob
import json
import os
import re
from pprint import pprint

from typing import Dict, Iterator, Optional

# result files of the stages, relative to an output directory
OUTPUT_FILES = ['hypotheses.json', 'stationary.json', 'orbits.json', 'homology.json', 'continuation.json',
                'manifest.json']


def load_experiments(dir_name: str) -> Iterator[str]:
    """
    Returns an iterator over the run directories of the sacred runs that reside under `dir_name`.
    Runs are ordered by their sacred id.
    :param dir_name: the directory that holds the runs
    :return: an iterator over run directory names
    """
    runs = [run for run in glob.glob(f"{dir_name}/*") if
            os.path.isdir(run) and not (run.endswith("_sources") or run.endswith("backup"))]
    return iter(sorted(runs, key=lambda run: (not os.path.basename(run).isdigit(), os.path.basename(run).zfill(8))))


def load_experiment_json(subfile: str) -> Optional[Dict]:
    """
    Uses the `json` module to read the contents of the file `subfile`.
    :param subfile: json file
    :return: python dictionary built from `subfile` or None if it does not exist
    """
    if not os.path.exists(subfile):
        return None
    with open(subfile, 'r') as f:
        return json.load(f)


def read_cout(subfile: str) -> Dict:
    """
    Reads the cout.txt file of a run and returns a dict with the following keys:
     - stage (str) the stage that was run
     - total_rank (int) total rank of the homology, if the run computed it
     - points (int) number of stationary points, if the run found them
     - certified (bool) False if the run printed an uncertified summary
    This function heavily depends on the output given by the main program.
    :param subfile: path to the cout.txt file (including the file name)
    :return: dict with extracted information
    """
    stage_regex = re.compile(r"Running '(\w+)'")
    rank_regex = re.compile(r"total rank (\d+)")
    points_regex = re.compile(r"points: (\d+)")

    info = {'stage': None, 'total_rank': None, 'points': None, 'certified': True}
    if not os.path.exists(subfile):
        return info
    with open(subfile, 'r') as f:
        for line in f:
            m = stage_regex.match(line)
            if m:
                info['stage'] = m.group(1)
            m = rank_regex.match(line)
            if m:
                info['total_rank'] = int(m.group(1))
                info['certified'] = "UNCERTIFIED" not in line
            m = points_regex.match(line)
            if m:
                info['points'] = int(m.group(1))
    return info


def load_output_dir(out_dir: str) -> Dict[str, Optional[Dict]]:
    """
    Reads the result files of an output directory; missing files map to None.
    """
    return {name: load_experiment_json(os.path.join(out_dir, name)) for name in OUTPUT_FILES}


class ExperimentsAdapter(object):
    """
    This class reads the run data created by sacred and provides it as an iterator.
    The methods of this class assume that the runs directory is not changed after an object is created.
    """

    def __init__(self, dir_name: str) -> None:
        """
        Creates a new ExperimentsAdapter that provides access to a sacred runs directory.
        :param dir_name: a path to a folder that holds sacred runs, i.e. OUT/runs
        """
        self.dir_name = dir_name
        self.experiments = load_experiments(dir_name)

    def reload(self) -> None:
        """
        Resets the iterator over the runs in the given directory.
        """
        self.experiments = load_experiments(self.dir_name)

    def __iter__(self) -> Iterator[Dict]:
        return self

    def __next__(self) -> Dict:
        """
        Iterates over the dicts given by the run files.
        :return: dict with keys filename, config, cout, metrics and run
        """
        experiment = next(self.experiments)
        return {
            'filename': experiment,
            'config': load_experiment_json(f"{experiment}/config.json"),
            'cout': read_cout(f"{experiment}/cout.txt"),
            'metrics': load_experiment_json(f"{experiment}/metrics.json"),
            'run': load_experiment_json(f"{experiment}/run.json")
        }


if __name__ == '__main__':
    DIR_NAME = "../results/runs"
    adapter = ExperimentsAdapter(DIR_NAME)
    for experiment_result in adapter:
        pprint(experiment_result)
