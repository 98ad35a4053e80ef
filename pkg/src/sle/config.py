"""Run configuration: flat `key = value` text with dotted namespaces.

The key names mirror the training-table vocabulary (lr, batch_size, ema_decay,
loss.l1_recon, noise.mix_prob, ...) so a config file can be eyeballed against
the experiment tables it came from. Unknown keys are rejected, as are missing
required ones.
"""

from dataclasses import dataclass, field

from .data import MixtureDatasetConfig
from .errors import ConfigError
from .objectives import LossWeights
from .sampler import SamplerConfig
from .sphere import NoiseDistConfig
from .trainer import TrainConfig


def parse_config_text(text):
    """Parse `key = value` lines ('#' comments, blank lines allowed)."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


_BOOL = {"true": True, "false": False, "1": True, "0": False}

# key -> (converter, default); REQUIRED means the config must set it
REQUIRED = object()


def _bool(value):
    v = value.lower()
    if v not in _BOOL:
        raise ConfigError(f"expected a boolean, got {value!r}")
    return _BOOL[v]


def _int_list(value):
    return [int(p) for p in value.split(",") if p.strip()]


SCHEMA = {
    "run_id": (str, REQUIRED),
    "out_dir": (str, REQUIRED),
    "data.n_classes": (int, 8),
    "data.d_data": (int, 32),
    "data.n_per_class": (int, 2000),
    "data.spread": (float, 0.5),
    "data.mean_radius": (float, 4.0),
    "data.seed": (int, 42),
    "tokenizer.d_latent": (int, 32),
    "tokenizer.seed": (int, 7),
    "model.hidden": (int, 256),
    "model.blocks": (int, 4),
    "train.epochs": (int, 300),
    "train.batch_size": (int, 256),
    "train.lr": (float, 1e-4),
    "train.weight_decay": (float, 0.0),
    "train.beta1": (float, 0.9),
    "train.beta2": (float, 0.95),
    "train.ema_decay": (float, 0.9995),
    "train.seed": (int, 123),
    "train.checkpoint_every": (int, 0),
    "train.spherify": (_bool, True),
    "noise.kind": (str, "logit_normal"),
    "noise.mu": (float, 0.4),
    "noise.s": (float, 1.0),
    "noise.lo": (float, 0.0),
    "noise.hi": (float, 85.0),
    "noise.mix_lo": (float, 85.0),
    "noise.mix_hi": (float, 89.0),
    "noise.mix_prob": (float, 0.2),
    "noise.sigma_max": (float, 85.0),
    "loss.l1_recon": (float, 50.0),
    "loss.l1_cons": (float, 25.0),
    "loss.cos_recon": (float, 1.0),
    "loss.cos_cons": (float, 1.0),
    "loss.latent_cons": (float, 0.0),
    "loss.cls_drop": (float, 0.1),
    "sample.steps": (int, 4),
    "sample.sigma_max": (float, 24.0),
    "sample.omega": (float, 2.0),
    "sample.gamma": (float, 0.5),
    "sample.seed": (int, 900),
    "sample.fresh_eps": (_bool, False),
    "sample.use_ema": (_bool, True),
    "eval.n_samples": (int, 5000),
    "ablate.epochs": (int, 80),
    "ablate.n_per_class": (int, 500),
    "ablate.batch_size": (int, 128),
    "ablate.seeds": (_int_list, [2001, 2002]),
    "ablate.eval_n": (int, 4000),
    "ablate.steps": (_int_list, [2, 4, 8]),
}


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def flat(self):
        """JSON-serializable echo for checkpoints, in schema order."""
        return {k: self.values[k] for k in SCHEMA}

    @property
    def run_id(self):
        return self.values["run_id"]

    @property
    def out_dir(self):
        return self.values["out_dir"]

    def dataset_config(self):
        v = self.values
        return MixtureDatasetConfig(
            n_classes=v["data.n_classes"], d_data=v["data.d_data"],
            n_per_class=v["data.n_per_class"], spread=v["data.spread"],
            mean_radius=v["data.mean_radius"], seed=v["data.seed"])

    def noise_config(self):
        v = self.values
        return NoiseDistConfig(
            kind=v["noise.kind"], mu=v["noise.mu"], s=v["noise.s"],
            sigma_range=(v["noise.lo"], v["noise.hi"]),
            mix_range=(v["noise.mix_lo"], v["noise.mix_hi"]),
            mix_probability=v["noise.mix_prob"], sigma_max=v["noise.sigma_max"])

    def loss_weights(self):
        v = self.values
        return LossWeights(
            l1_recon=v["loss.l1_recon"], l1_cons=v["loss.l1_cons"],
            cos_recon=v["loss.cos_recon"], cos_cons=v["loss.cos_cons"],
            latent_cons=v["loss.latent_cons"], cls_drop_prob=v["loss.cls_drop"])

    def train_config(self):
        v = self.values
        return TrainConfig(
            epochs=v["train.epochs"], batch_size=v["train.batch_size"],
            lr=v["train.lr"], weight_decay=v["train.weight_decay"],
            betas=(v["train.beta1"], v["train.beta2"]),
            ema_decay=v["train.ema_decay"], seed=v["train.seed"],
            checkpoint_every=v["train.checkpoint_every"],
            spherify=v["train.spherify"],
            noise=self.noise_config(), weights=self.loss_weights())

    def sampler_config(self, **overrides):
        v = self.values
        base = dict(steps=v["sample.steps"], sigma_max=v["sample.sigma_max"],
                    omega=v["sample.omega"], gamma=v["sample.gamma"],
                    seed=v["sample.seed"], fresh_eps_per_step=v["sample.fresh_eps"],
                    spherify=v["train.spherify"])
        base.update({k: val for k, val in overrides.items() if val is not None})
        return SamplerConfig(**base)


def build_run_config(raw):
    """Validate a flat string dict against the schema; typed RunConfig out."""
    unknown = set(raw) - set(SCHEMA)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    values = {}
    for key, (conv, default) in SCHEMA.items():
        if key in raw:
            try:
                values[key] = conv(raw[key])
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad value for {key!r}: {raw[key]!r} ({exc})") from exc
        elif default is REQUIRED:
            raise ConfigError(f"missing required key {key!r}")
        else:
            values[key] = default
    if not values["run_id"] or any(c in values["run_id"] for c in "/\\ \t"):
        raise ConfigError(f"run_id must be nonempty and filesystem-safe, "
                          f"got {values['run_id']!r}")
    return RunConfig(values)


def load_run_config(path):
    with open(path, "r", encoding="utf-8") as f:
        return build_run_config(parse_config_text(f.read()))


def run_config_from_flat(flat):
    """Rebuild a RunConfig from a checkpoint's config echo (values already typed)."""
    cfg = RunConfig(dict(flat))
    missing = set(SCHEMA) - set(cfg.values)
    if missing:
        raise ConfigError(f"checkpoint config echo missing keys: {sorted(missing)}")
    # JSON round-trips tuples/lists as lists; normalize the typed fields
    cfg.values["ablate.seeds"] = list(cfg.values["ablate.seeds"])
    cfg.values["ablate.steps"] = list(cfg.values["ablate.steps"])
    return cfg
