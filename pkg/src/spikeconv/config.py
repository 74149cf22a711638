"""Experiment configuration: defaults, INI-style files, validation.

The file format is plain sectioned key=value text (configparser syntax).
Every key has a default matching the package's standard parameter set, so
an empty file is a valid experiment; unknown sections or keys are rejected
with the offending name in the message.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .core import Shape3
from .encoding import CodingWindow, DoGParams
from .network import LayerSpec, NetworkSpec
from .plasticity import AdditiveStdp, BiologicalStdp, MultiplicativeStdp
from .simulate import InhibitionPolicy
from .training import EnsembleMember, TrainConfig

__all__ = ["ExperimentConfig", "parse_config", "load_config", "DEFAULT_ARCHITECTURE"]

# the published MNIST stack: conv-pool-conv-pool-fc
DEFAULT_ARCHITECTURE = (
    LayerSpec("conv", 5, 5, 32, 1, 0),
    LayerSpec("pool", 2, 2, 32, 2, 0),
    LayerSpec("conv", 5, 5, 128, 1, 0),
    LayerSpec("pool", 2, 2, 128, 2, 0),
    LayerSpec("fc", 4, 4, 4096, 1, 0),
)


@dataclass
class ExperimentConfig:
    """All tunables of one experiment, with standard defaults."""

    name: str = "default"
    # learning
    n_epoch: int = 100
    anneal: float = 0.95
    # stdp
    rule_name: str = "biological"
    eta_w: float = 0.1
    beta: float = 1.0
    tau: float = 0.1
    bio_delay_decay: bool = False
    w_min: float = 0.0
    w_max: float = 1.0
    # coding
    t_start: float = 0.0
    t_end: float = 1.0
    # threshold adaptation
    t_target: float = 0.7
    delta_t: float = 0.0
    t_targets: tuple | None = None
    eta_th: float = 1.0
    th_min: float = 1.0
    v_th_mean: float = 5.0
    v_th_std: float = 1.0
    v_inh: float = 1.0
    # pre-processing
    dog_size: int = 7
    dog_center: float = 1.0
    dog_surround: float = 4.0
    # simulation
    inference_inhibition: str = "none"
    inhibition_scope: str = "column"
    inhibition_layers: str = "all"
    # training protocol
    shuffle: bool = False
    no_winner: str = "share"
    prefix_policy: str = "none"
    # architecture + optional multi-target ensemble
    architecture: tuple = field(default_factory=lambda: DEFAULT_ARCHITECTURE)
    ensemble: tuple = ()

    def rule(self):
        if self.rule_name == "additive":
            return AdditiveStdp(self.eta_w)
        if self.rule_name == "multiplicative":
            return MultiplicativeStdp(self.eta_w, self.beta)
        if self.rule_name == "biological":
            return BiologicalStdp(self.eta_w, self.tau, self.bio_delay_decay, self.t_end)
        raise ValueError(f"unknown STDP rule {self.rule_name!r}")

    def window(self) -> CodingWindow:
        return CodingWindow(self.t_start, self.t_end)

    def dog(self) -> DoGParams:
        return DoGParams(self.dog_size, self.dog_center, self.dog_surround)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            n_epoch=self.n_epoch,
            anneal=self.anneal,
            rule=self.rule(),
            t_target=self.t_target,
            delta_t=self.delta_t,
            t_targets=self.t_targets,
            eta_th=self.eta_th,
            th_min=self.th_min,
            v_th_mean=self.v_th_mean,
            v_th_std=self.v_th_std,
            w_min=self.w_min,
            w_max=self.w_max,
            dog=self.dog(),
            window=self.window(),
            shuffle=self.shuffle,
            no_winner=self.no_winner,
            prefix_policy=self.prefix_policy,
        )

    def inference_policy(self) -> InhibitionPolicy:
        return InhibitionPolicy(self.inference_inhibition, self.v_inh,
                                self.inhibition_scope, self.inhibition_layers)

    def network_spec(self, input_shape: Shape3) -> NetworkSpec:
        return NetworkSpec(input_shape, self.architecture)

    def ensemble_members(self) -> list[EnsembleMember]:
        return [EnsembleMember(t, n) for t, n in self.ensemble]

    def validate(self) -> "ExperimentConfig":
        self.rule()
        self.window()
        self.dog()
        self.train_config()
        self.inference_policy()
        if not self.architecture:
            raise ValueError("architecture has no layers")
        if self.t_targets is not None and self.delta_t != 0.0:
            raise ValueError("give either explicit t_targets or delta_t, not both")
        for t, n in self.ensemble:
            EnsembleMember(t, n)
        return self


_PARSERS = {
    ("meta", "name"): ("name", str),
    ("learning", "lambda"): ("anneal", float),
    ("learning", "n_epoch"): ("n_epoch", int),
    ("stdp", "rule"): ("rule_name", str),
    ("stdp", "eta_w"): ("eta_w", float),
    ("stdp", "beta"): ("beta", float),
    ("stdp", "tau"): ("tau", float),
    ("stdp", "bio_delay_decay"): ("bio_delay_decay", None),
    ("stdp", "w_min"): ("w_min", float),
    ("stdp", "w_max"): ("w_max", float),
    ("coding", "t_start"): ("t_start", float),
    ("coding", "t_end"): ("t_end", float),
    ("threshold", "t_target"): ("t_target", float),
    ("threshold", "delta_t"): ("delta_t", float),
    ("threshold", "t_targets"): ("t_targets", "floats"),
    ("threshold", "eta_th"): ("eta_th", float),
    ("threshold", "th_min"): ("th_min", float),
    ("threshold", "v_th_mean"): ("v_th_mean", float),
    ("threshold", "v_th_std"): ("v_th_std", float),
    ("threshold", "v_inh"): ("v_inh", float),
    ("preprocess", "dog_size"): ("dog_size", int),
    ("preprocess", "dog_center"): ("dog_center", float),
    ("preprocess", "dog_surround"): ("dog_surround", float),
    ("simulation", "inference_inhibition"): ("inference_inhibition", str),
    ("simulation", "inhibition_scope"): ("inhibition_scope", str),
    ("simulation", "inhibition_layers"): ("inhibition_layers", str),
    ("training", "shuffle"): ("shuffle", None),
    ("training", "no_winner"): ("no_winner", str),
    ("training", "prefix_policy"): ("prefix_policy", str),
}


def parse_config(text: str, name: str = "config") -> ExperimentConfig:
    """Parse and validate sectioned key=value text into a config."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text, source=name)
    except configparser.Error as exc:
        raise ValueError(f"{name}: {exc}") from None

    cfg = ExperimentConfig(name=name)
    for section in parser.sections():
        if section == "architecture":
            cfg.architecture = _parse_architecture(parser[section], name)
            continue
        if section == "ensemble":
            cfg.ensemble = _parse_ensemble(parser[section], name)
            continue
        for key, value in parser[section].items():
            spec = _PARSERS.get((section, key))
            if spec is None:
                raise ValueError(f"{name}: unknown option [{section}] {key}")
            attr, conv = spec
            try:
                if conv is None:  # boolean
                    parsed = parser[section].getboolean(key)
                elif conv == "floats":
                    parsed = tuple(float(v) for v in value.split())
                else:
                    parsed = conv(value)
            except ValueError:
                raise ValueError(
                    f"{name}: bad value for [{section}] {key}: {value!r}"
                ) from None
            setattr(cfg, attr, parsed)
    try:
        cfg.validate()
    except ValueError as exc:
        raise ValueError(f"{name}: {exc}") from None
    return cfg


def _parse_architecture(section, name):
    rows = []
    for key in sorted(section, key=_layer_key):
        if not key.startswith("layer"):
            raise ValueError(f"{name}: unknown option [architecture] {key}")
        try:
            rows.append(LayerSpec.from_line(section[key]))
        except ValueError as exc:
            raise ValueError(f"{name}: [architecture] {key}: {exc}") from None
    if not rows:
        raise ValueError(f"{name}: [architecture] section is empty")
    return tuple(rows)


def _layer_key(key: str):
    digits = "".join(ch for ch in key if ch.isdigit())
    return (int(digits) if digits else 0, key)


def _parse_ensemble(section, name):
    members = []
    for key in sorted(section, key=_layer_key):
        if not key.startswith("member"):
            raise ValueError(f"{name}: unknown option [ensemble] {key}")
        parts = section[key].split()
        if len(parts) != 2:
            raise ValueError(
                f"{name}: [ensemble] {key} must be 't_target output_maps'"
            )
        members.append((float(parts[0]), int(parts[1])))
    return tuple(members)


def load_config(path) -> ExperimentConfig:
    with open(path) as f:
        text = f.read()
    from pathlib import Path

    return parse_config(text, name=Path(path).stem)
