"""Model configuration and its line-based ``key=value`` text form."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

from ..errors import ConfigurationError

DECODER_MODES = ("mixed", "separate")
DISTORTIONS = ("mse", "ms_ssim")
MSE_LAMBDAS = (0.0016, 0.0032, 0.0075, 0.015, 0.03, 0.045)
MS_SSIM_LAMBDAS = (3.0, 12.0, 40.0, 120.0)


def round4(value: float) -> int:
    return max(4, int(round(value / 4.0)) * 4)


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters of one codec.

    ``N`` and ``M`` are nominal full-size widths; the layers actually built
    use ``n_eff``/``m_eff``, i.e. the nominal width times ``width_scale``
    rounded to a multiple of 4. ``widened`` selects the enlarged single
    hyper-decoder used as a parameter-matched control (mixed mode only).
    """

    mode: str = "mixed"
    N: int = 128
    M: int = 128
    K: int = 3
    width_scale: float = 0.125
    depth: int = 1
    lmbda: float = 12.0
    distortion: str = "ms_ssim"
    widened: bool = False
    context_kernel: int = 5

    def __post_init__(self):
        if self.mode not in DECODER_MODES:
            raise ConfigurationError(f"mode must be one of {DECODER_MODES}, got {self.mode!r}")
        if self.distortion not in DISTORTIONS:
            raise ConfigurationError(f"distortion must be one of {DISTORTIONS}, got {self.distortion!r}")
        if self.N < 4 or self.M < 4:
            raise ConfigurationError(f"N and M must be >= 4 (got N={self.N}, M={self.M})")
        if self.K < 1:
            raise ConfigurationError(f"K must be >= 1, got {self.K}")
        if not self.lmbda > 0:
            raise ConfigurationError(f"lambda must be positive, got {self.lmbda}")
        if not self.width_scale > 0:
            raise ConfigurationError(f"width_scale must be positive, got {self.width_scale}")
        if self.depth < 0:
            raise ConfigurationError(f"depth must be >= 0, got {self.depth}")
        if self.widened and self.mode != "mixed":
            raise ConfigurationError("widened applies to the mixed decoder only")
        if self.context_kernel % 2 == 0 or self.context_kernel < 3:
            raise ConfigurationError(f"context_kernel must be odd and >= 3, got {self.context_kernel}")

    @property
    def n_eff(self) -> int:
        return round4(self.N * self.width_scale)

    @property
    def m_eff(self) -> int:
        return round4(self.M * self.width_scale)

    @property
    def arm(self) -> str:
        return "widened" if self.widened else self.mode

    def with_(self, **changes) -> "ModelConfig":
        return replace(self, **changes)

    def to_text(self) -> str:
        lines = [f"{k}={_fmt(v)}" for k, v in asdict(self).items()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ModelConfig":
        return cls(**parse_config_text(text, {f.name: f.type for f in fields(cls)}))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


_ALIASES = {"lambda": "lmbda", "decoder_mode": "mode", "residual_depth": "depth"}


def _convert(key: str, raw: str, typ):
    typ = typ if isinstance(typ, str) else typ.__name__
    try:
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        if typ == "bool":
            low = raw.lower()
            if low not in {"true", "false", "1", "0", "yes", "no"}:
                raise ValueError(raw)
            return low in {"true", "1", "yes"}
    except ValueError:
        raise ConfigurationError(f"config key {key!r}: cannot parse {raw!r} as {typ}") from None
    return raw


def parse_config_text(text: str, schema: dict[str, object]) -> dict[str, object]:
    """Parse ``key=value`` lines (``#`` comments, blank lines ignored) against ``schema``.

    Keys not in ``schema`` raise; known aliases (``lambda``, ``decoder_mode``,
    ``residual_depth``) are accepted.
    """
    out: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"config line {lineno}: expected key=value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key)
        if key not in schema:
            raise ConfigurationError(f"config line {lineno}: unknown key {key!r}")
        out[key] = _convert(key, raw, schema[key])
    return out
