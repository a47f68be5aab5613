"""INI-style run and architecture configs.

Run configs have sections ``[meta]``, ``[model]``, ``[train]``, ``[data]``
and optionally ``[widen]``.  Architecture configs (used by ``whatif``) have
``[meta]``, ``[arch]`` and one ``[layer.N]`` section per layer.  Relative
paths are resolved against the config file's directory.
"""

import configparser
import os
from dataclasses import dataclass, field, fields

from .arch import KINDS, ChainError, LayerSpec, ModelSpec
from .lstm import Schedule
from .quant import ALLOWED_BITS, QuantSpec

CONFIG_VERSION = 1


class ConfigError(ValueError):
    pass


def _locate(text):
    """(section, key) -> 1-based line number of its first definition."""
    where, section = {}, None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            where.setdefault((section, None), lineno)
            continue
        for sep in ("=", ":"):
            if sep in line:
                key = line.split(sep, 1)[0].strip().lower()
                where.setdefault((section, key), lineno)
                break
    return where


class _Reader:
    def __init__(self, text, source):
        self.source = source
        self.lines = _locate(text)
        self.parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            self.parser.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from exc

    def fail(self, section, key, msg):
        line = self.lines.get((section, key)) or self.lines.get((section, None))
        loc = f"{self.source}:{line}" if line else self.source
        raise ConfigError(f"{loc}: [{section}] {key}: {msg}")

    def has(self, section, key=None):
        if key is None:
            return self.parser.has_section(section)
        return self.parser.has_option(section, key)

    def get(self, section, key, conv=str, default=None, required=False):
        if not self.parser.has_option(section, key):
            if required:
                self.fail(section, key, "missing required field")
            return default
        raw = self.parser.get(section, key)
        try:
            return conv(raw)
        except (TypeError, ValueError) as exc:
            self.fail(section, key, f"invalid value {raw!r} ({exc})")

    def bits(self, section, key, default=32):
        value = self.get(section, key, int, default)
        if value not in ALLOWED_BITS:
            self.fail(section, key, f"{value} not in allowed bit-widths {ALLOWED_BITS}")
        return value

    def check_version(self):
        version = self.get("meta", "version", int, CONFIG_VERSION)
        if version != CONFIG_VERSION:
            self.fail("meta", "version", f"unsupported config version {version}")


def _bool(raw):
    value = raw.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _int_list(raw):
    return [int(part) for part in raw.replace(",", " ").split()]


@dataclass
class RunConfig:
    vocab_mode: str = "char"
    max_vocab: int | None = None
    embed_dim: int = 32
    hidden_size: int = 64
    weight_bits: int = 32
    activation_bits: int = 32
    quantize_embedding_projection: bool = True
    schedule: Schedule = field(default_factory=Schedule)
    seed: int = 0
    train_path: str | None = None
    valid_path: str | None = None
    test_path: str | None = None
    widen_factor: float | None = None
    source: str = "<defaults>"

    @property
    def quant(self):
        return QuantSpec(self.weight_bits, self.activation_bits)

    def with_cell(self, weight_bits, activation_bits, hidden_size, seed):
        clone = RunConfig(**{f.name: getattr(self, f.name) for f in fields(self)})
        clone.weight_bits, clone.activation_bits = weight_bits, activation_bits
        clone.hidden_size, clone.seed = hidden_size, seed
        return clone


def _resolve(base_dir, path):
    if path is None or os.path.isabs(path):
        return path
    return os.path.normpath(os.path.join(base_dir, path))


def parse_run_config(text, source="<string>", base_dir="."):
    r = _Reader(text, source)
    r.check_version()
    cfg = RunConfig(source=source)
    mode = r.get("model", "vocab_mode", str, "char")
    if mode not in ("char", "word"):
        r.fail("model", "vocab_mode", f"expected 'char' or 'word', got {mode!r}")
    cfg.vocab_mode = mode
    cfg.max_vocab = r.get("model", "max_vocab", int, None)
    cfg.embed_dim = r.get("model", "embed_dim", int, cfg.embed_dim)
    cfg.hidden_size = r.get("model", "hidden_size", int, cfg.hidden_size)
    for key in ("embed_dim", "hidden_size"):
        if getattr(cfg, key) < 1:
            r.fail("model", key, "must be >= 1")
    cfg.weight_bits = r.bits("model", "weight_bits")
    cfg.activation_bits = r.bits("model", "activation_bits")
    cfg.quantize_embedding_projection = r.get("model", "quantize_embedding_projection", _bool, True)

    sched = Schedule()
    for f in fields(Schedule):
        conv = type(getattr(sched, f.name))
        setattr(sched, f.name, r.get("train", f.name, conv, getattr(sched, f.name)))
    for key in ("batch", "seqlen", "eval_batch", "patience"):
        if getattr(sched, key) < 1:
            r.fail("train", key, "must be >= 1")
    if sched.epochs < 0:
        r.fail("train", "epochs", "must be >= 0")
    if sched.lr < 0:
        r.fail("train", "lr", "must be >= 0")
    cfg.schedule = sched
    cfg.seed = r.get("train", "seed", int, 0)
    if not 0 <= cfg.seed < 2 ** 64:
        r.fail("train", "seed", "must be an unsigned 64-bit integer")

    cfg.train_path = _resolve(base_dir, r.get("data", "train"))
    cfg.valid_path = _resolve(base_dir, r.get("data", "valid"))
    cfg.test_path = _resolve(base_dir, r.get("data", "test"))

    factor = r.get("widen", "factor", float, None)
    if factor is not None and not factor > 1:
        r.fail("widen", "factor", "must be > 1")
    cfg.widen_factor = factor
    return cfg


def load_run_config(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_run_config(text, source=path, base_dir=os.path.dirname(os.path.abspath(path)))


@dataclass
class ArchConfig:
    spec: ModelSpec
    batch: int = 1
    timesteps: int = 1
    reference: dict = field(default_factory=dict)


def parse_arch_config(text, source="<string>"):
    r = _Reader(text, source)
    r.check_version()
    layer_sections = [s for s in r.parser.sections() if s.startswith("layer.")]
    if not layer_sections:
        raise ConfigError(f"{source}: no [layer.N] sections")
    layers = []
    for section in layer_sections:
        try:
            index = int(section.split(".", 1)[1])
        except ValueError:
            r.fail(section, None, "section name must be layer.<integer>")
        kind = r.get(section, "kind", str, required=True)
        if kind not in KINDS:
            r.fail(section, "kind", f"unknown kind {kind!r}; expected one of {KINDS}")
        try:
            layers.append(LayerSpec(
                index=index,
                name=r.get(section, "name", str, f"layer{index}"),
                kind=kind,
                in_dim=r.get(section, "in_dim", int, required=True),
                out_dim=r.get(section, "out_dim", int, required=True),
                weight_bits=r.bits(section, "weight_bits"),
                activation_bits=r.bits(section, "activation_bits"),
            ))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            r.fail(section, None, str(exc))
    layers.sort(key=lambda layer: layer.index)
    try:
        spec = ModelSpec(tuple(layers), r.get("arch", "name", str, ""))
    except ChainError as exc:
        raise ConfigError(f"{source}: inconsistent architecture: {exc}") from exc
    batch = r.get("arch", "batch", int, 1)
    timesteps = r.get("arch", "timesteps", int, 1)
    reference = {}
    if r.has("reference"):
        reference = {key: r.get("reference", key, float) for key in r.parser.options("reference")}
    return ArchConfig(spec, batch, timesteps, reference)


def load_arch_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_arch_config(fh.read(), source=path)


def data_path(name):
    """Path of a file shipped in ``lprnn/data``."""
    return os.path.join(os.path.dirname(__file__), "data", name)
