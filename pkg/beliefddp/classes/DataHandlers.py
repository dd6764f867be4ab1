import csv
import hashlib
import json
import logging
import os
from copy import deepcopy
from dataclasses import fields

from yaml import load, YAMLError
try:
    from yaml import CLoader as Loader
except ImportError:
    from yaml import Loader

from .CustomExceptions import ConfigurationError
from .Executions import ExecutionConfig
from .Scenarios import SCENARIOS
from .Solvers import SolverConfig
from .TrajectoryTrees import TrajectoryTree

logger = logging.getLogger(__name__)

OUTPUT_ENV_VAR = "BELIEFDDP_OUT"


def config_hash(params):
    """SHA-256 of the canonical JSON of a parameter set; independent of key order."""
    canonical = json.dumps(params, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def parse_scalar(text):
    """Interpret an override value the way YAML would (numbers, booleans, lists)."""
    try:
        return load(text, Loader=Loader)
    except YAMLError as err:
        raise ConfigurationError(f"cannot parse override value '{text}': {err}")


class ScenarioConfigLoader:
    """
    Loads one experiment's YAML file (sections scenario, solver, execution) and
    applies dotted key=value overrides on top of it.
    """

    SECTIONS = ("scenario", "solver", "execution")

    def __init__(self, config_root, project_root, experiment, config_file=None):
        self._config_root = os.path.abspath(config_root)
        self._project_root = os.path.abspath(project_root)
        if experiment not in SCENARIOS:
            raise ConfigurationError(f"unknown experiment '{experiment}', valid names: {', '.join(SCENARIOS)}")
        self._experiment = experiment
        self._config_path = config_file or os.path.join(self._config_root, f"{experiment}.yaml")
        if not os.path.isfile(self._config_path):
            raise ConfigurationError(f"config file {self._config_path} not found")
        with open(self._config_path, 'r') as config_file_handle:
            try:
                self._configdata = load(config_file_handle, Loader=Loader) or {}
            except YAMLError as err:
                raise ConfigurationError(f"config file {self._config_path} is not valid YAML: {err}")
        unknown = set(self._configdata) - set(self.SECTIONS) - {"experiment"}
        if unknown:
            raise ConfigurationError(f"unknown sections in {self._config_path}: {sorted(unknown)}")
        for section in self.SECTIONS:
            self._configdata.setdefault(section, {})
        self._configdata["experiment"] = experiment

    @property
    def config_root(self):
        return self._config_root

    @property
    def project_root(self):
        return self._project_root

    @property
    def config_path(self):
        return self._config_path

    @property
    def experiment(self):
        return self._experiment

    def get_scenario(self):
        return deepcopy(self._configdata["scenario"])

    def get_solver(self):
        return deepcopy(self._configdata["solver"])

    def get_execution(self):
        return deepcopy(self._configdata["execution"])

    def resolved(self):
        """The full parameter set after overrides, as recorded in every output file."""
        return deepcopy(self._configdata)

    def config_hash(self):
        return config_hash(self._configdata)

    def _section_fields(self, section):
        config_class = {
            "scenario": SCENARIOS[self._experiment][0],
            "solver": SolverConfig,
            "execution": ExecutionConfig,
        }[section]
        return {f.name for f in fields(config_class)}

    def apply_overrides(self, overrides):
        """
        Apply overrides such as 'scenario.sigma_level=9.1' or 'solver.max_iterations=50'.
        :raises ConfigurationError: for malformed overrides or keys that do not exist
        :return: the resolved parameter set
        """
        for override in overrides or ():
            if "=" not in override:
                raise ConfigurationError(f"override '{override}' is not of the form key=value")
            key, text = override.split("=", 1)
            path = key.strip().split(".")
            if len(path) < 2 or path[0] not in self.SECTIONS:
                raise ConfigurationError(
                    f"override key '{key}' must start with one of {', '.join(self.SECTIONS)}")
            node = self._configdata[path[0]]
            if path[1] not in node and path[1] not in self._section_fields(path[0]):
                raise ConfigurationError(f"unknown key '{key}'")
            for part in path[1:-1]:
                if not isinstance(node.get(part), dict):
                    raise ConfigurationError(f"unknown key '{key}'")
                node = node[part]
            if len(path) > 2 and path[-1] not in node:
                raise ConfigurationError(f"unknown key '{key}'")
            node[path[-1]] = parse_scalar(text)
            logger.debug("override %s = %r", key, node[path[-1]])
        return self.resolved()

    def set_value(self, key, value):
        """Programmatic override, used for CLI flags that shadow config keys."""
        section, name = key.split(".", 1)
        self._configdata[section][name] = value


class Filehandler:
    """Writes every result file; JSON keys are sorted so reruns are byte-identical."""

    def __init__(self, root_directory=None):
        root_directory = root_directory or os.environ.get(OUTPUT_ENV_VAR) or os.getcwd()
        self._root_directory = root_directory

    @property
    def root_directory(self):
        return self._root_directory

    @root_directory.setter
    def root_directory(self, new_root_dir):
        self._root_directory = new_root_dir

    def path(self, filename):
        return os.path.join(self._root_directory, filename)

    def create_folder(self, target_dir=None):
        target_dir = target_dir or self._root_directory
        if os.path.isdir(target_dir):
            logger.debug("dir %s already exists.", target_dir)
        os.makedirs(target_dir, exist_ok=True)
        return target_dir

    def write_json(self, data, filename):
        file_path = self.path(filename)
        with open(file_path, 'w') as out_file:
            json.dump(data, out_file, sort_keys=True, indent=2)
            out_file.write("\n")
        return file_path

    def read_json(self, filename):
        with open(self.path(filename), 'r') as in_file:
            return json.load(in_file)

    def write_json_lines(self, records, filename, header=None):
        """One JSON object per line, preceded by the header object when given."""
        file_path = self.path(filename)
        with open(file_path, 'w') as out_file:
            if header is not None:
                out_file.write(json.dumps(header, sort_keys=True) + "\n")
            for record in records:
                out_file.write(json.dumps(record, sort_keys=True) + "\n")
        return file_path

    def write_csv(self, rows, filename, columns, comments=()):
        """CSV with '#'-prefixed comment lines before the column header."""
        file_path = self.path(filename)
        with open(file_path, 'w', newline='') as out_file:
            for comment in comments:
                out_file.write(f"# {comment}\n")
            writer = csv.DictWriter(out_file, fieldnames=list(columns), lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({column: row[column] for column in columns})
        return file_path

    def read_csv(self, filename):
        with open(self.path(filename), 'r', newline='') as in_file:
            lines = [line for line in in_file if not line.startswith("#")]
        return list(csv.DictReader(lines))

    def save_tree(self, tree, filename, header=None):
        data = dict(header or {})
        data["tree"] = tree.to_dict()
        return self.write_json(data, filename)

    def load_tree(self, filename):
        return TrajectoryTree.from_dict(self.read_json(filename)["tree"])
