"""The three-stage estimation network.

Stage 1 condenses the raw sequence with two [conv -> ELU -> maxpool(2,2)]
blocks (skipped entirely by the ``use_cnn=False`` ablation), stage 2 runs a
stacked LSTM over the condensed sequence and mean-pools its top hidden
states, stage 3 maps the pooled feature vector, concatenated with the
observation frequency h (and, in standardized-input mode, the per-sample
shift/scale constants), through a small fully connected head to the
parameter vector in natural units.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import BatchNormState, ShapeError, Tensor
from .checkpoint import (
    SECTION_ADAM,
    SECTION_CONFIG,
    pack_tensors,
    read_checkpoint,
    unpack_tensors,
    write_checkpoint,
)
from .optim import AdamState
from .rng import SeededRng
from .sde import SdeFamily

MIN_INPUT_LENGTH = 16


class InputTooShortError(ValueError):
    """The input sequence is shorter than the network can condense."""


@dataclass(frozen=True)
class PEnetConfig:
    """Architecture hyperparameters; defaults follow the reference configuration."""

    n_outputs: int
    target_weights: tuple[float, ...]
    conv_layers: int = 2
    kernel_size: int = 3
    conv_channels: int = 25
    lstm_layers: int = 4
    lstm_hidden: int = 25
    fc_layers: int = 3
    fc_width: int = 20
    use_cnn: bool = True
    standardize_input: bool = True
    pool_window: int = 2
    pool_stride: int = 2

    def __post_init__(self):
        if self.n_outputs not in (2, 3):
            raise ValueError(f"n_outputs must be 2 or 3, got {self.n_outputs}")
        weights = tuple(float(w) for w in self.target_weights)
        object.__setattr__(self, "target_weights", weights)
        if len(weights) != self.n_outputs:
            raise ValueError("target_weights length must equal n_outputs")
        if any(w <= 0.0 for w in weights):
            raise ValueError("target_weights must be positive")
        if self.kernel_size % 2 != 1:
            raise ValueError(f"kernel_size must be odd, got {self.kernel_size}")
        for name in ("conv_layers", "lstm_layers", "fc_layers", "conv_channels",
                     "lstm_hidden", "fc_width", "pool_window", "pool_stride"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @classmethod
    def for_family(cls, family: SdeFamily, **overrides) -> "PEnetConfig":
        """Config with output dimension and loss weights taken from the family.

        Loss weights balance parameter scales as 1 / (training range width).
        """
        weights = tuple(
            1.0 / (hi - lo) if hi > lo else 1.0 for lo, hi in family.param_ranges()
        )
        return cls(n_outputs=family.n_params, target_weights=weights, **overrides)

    @property
    def n_extra_features(self) -> int:
        """Features appended to the pooled LSTM vector: h, plus (shift, scale)."""
        return 3 if self.standardize_input else 1

    def condensed_length(self, n: int) -> int:
        """Sequence length reaching the LSTM for an input of length n."""
        if not self.use_cnn:
            return n
        for _ in range(self.conv_layers):
            n = (n - self.pool_window) // self.pool_stride + 1
        return n

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, payload: str) -> "PEnetConfig":
        raw = json.loads(payload)
        raw["target_weights"] = tuple(raw["target_weights"])
        return cls(**raw)


def _glorot(gen: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return gen.uniform(-limit, limit, size=shape)


def stack_batch(values_list) -> np.ndarray:
    """Stack equal-length sequences into a (B, N) array."""
    lengths = {len(v) for v in values_list}
    if len(lengths) != 1:
        raise ShapeError(f"mixed sequence lengths in batch: {sorted(lengths)}")
    return np.stack([np.asarray(v, dtype=np.float64) for v in values_list])


class PEnetModel:
    """Weights plus forward pass; ``training`` selects batch-norm behavior."""

    def __init__(self, config: PEnetConfig, seed: int = 0):
        self.config = config
        self.training = True
        self.bn_state = BatchNormState.initial(config.fc_width)
        self._params: dict[str, Tensor] = {}
        gen = SeededRng(seed).generator

        def param(name, data):
            tensor = Tensor(data, requires_grad=True, name=name)
            self._params[name] = tensor
            return tensor

        cfg = config
        if cfg.use_cnn:
            c_in = 1
            for i in range(cfg.conv_layers):
                shape = (cfg.conv_channels, c_in, cfg.kernel_size)
                param(f"conv{i}.weight",
                      _glorot(gen, shape, c_in * cfg.kernel_size, cfg.conv_channels * cfg.kernel_size))
                param(f"conv{i}.bias", np.zeros(cfg.conv_channels))
                c_in = cfg.conv_channels
            lstm_in = cfg.conv_channels
        else:
            lstm_in = 1
        hidden = cfg.lstm_hidden
        bound = 1.0 / np.sqrt(hidden)
        for i in range(cfg.lstm_layers):
            d_in = lstm_in if i == 0 else hidden
            param(f"lstm{i}.w", gen.uniform(-bound, bound, size=(d_in, 4 * hidden)))
            param(f"lstm{i}.u", gen.uniform(-bound, bound, size=(hidden, 4 * hidden)))
            bias = np.zeros(4 * hidden)
            bias[hidden:2 * hidden] = 1.0  # forget gate opens at init
            param(f"lstm{i}.b", bias)
        width_in = hidden + cfg.n_extra_features
        for i in range(cfg.fc_layers + 1):
            width_out = cfg.n_outputs if i == cfg.fc_layers else cfg.fc_width
            param(f"fc{i}.weight", _glorot(gen, (width_in, width_out), width_in, width_out))
            param(f"fc{i}.bias", np.zeros(width_out))
            width_in = width_out
        param("bn.gamma", np.ones(cfg.fc_width))
        param("bn.beta", np.zeros(cfg.fc_width))

    # -- parameter access ---------------------------------------------------

    def parameters(self) -> list[Tensor]:
        return list(self._params.values())

    def named_parameters(self) -> dict[str, Tensor]:
        return dict(self._params)

    def train(self) -> "PEnetModel":
        self.training = True
        return self

    def eval(self) -> "PEnetModel":
        self.training = False
        return self

    def count_parameters(self) -> int:
        return sum(p.data.size for p in self._params.values())

    def flop_estimate(self, n: int) -> dict[str, int]:
        """Multiply-add flops of one single-sample forward at input length n."""
        cfg = self.config
        stage1 = 0
        length = n
        if cfg.use_cnn:
            c_in = 1
            for _ in range(cfg.conv_layers):
                stage1 += 2 * c_in * cfg.conv_channels * cfg.kernel_size * length
                length = (length - cfg.pool_window) // cfg.pool_stride + 1
                c_in = cfg.conv_channels
        hidden = cfg.lstm_hidden
        stage2 = 0
        d_in = cfg.conv_channels if cfg.use_cnn else 1
        for i in range(cfg.lstm_layers):
            stage2 += 2 * (d_in + hidden) * 4 * hidden * length
            d_in = hidden
        stage3 = 0
        width_in = hidden + cfg.n_extra_features
        for i in range(cfg.fc_layers + 1):
            width_out = cfg.n_outputs if i == cfg.fc_layers else cfg.fc_width
            stage3 += 2 * width_in * width_out
            width_in = width_out
        return {"stage1": stage1, "stage2": stage2, "stage3": stage3,
                "total": stage1 + stage2 + stage3}

    # -- forward ------------------------------------------------------------

    def encode(self, x, h) -> Tensor:
        """Stages 1-2 for one equal-length group: (B, N) values and (B,)
        frequencies to the pooled feature rows z0 of shape (B, F + extras).

        ``x`` may be a Tensor (already shaped (B, 1, N)) when gradients with
        respect to the input are wanted; per-sample standardization is then
        the caller's responsibility.
        """
        cfg = self.config
        extras: list[np.ndarray]
        if isinstance(x, Tensor):
            xin = x
            if xin.data.ndim != 3 or xin.data.shape[1] != 1:
                raise ShapeError(f"encode: tensor input must be (B, 1, N), got {xin.data.shape}")
            batch, _, n = xin.data.shape
            extras = []
        else:
            x = np.asarray(x, dtype=np.float64)
            if x.ndim != 2:
                raise ShapeError(f"encode: expected (B, N) input, got shape {x.shape}")
            batch, n = x.shape
            if cfg.standardize_input:
                shift = x.mean(axis=1)
                spread = np.maximum(x.std(axis=1), 1e-12)
                x = (x - shift[:, None]) / spread[:, None]
                extras = [shift, spread]
            else:
                extras = []
            xin = Tensor(x[:, None, :])
        if n < MIN_INPUT_LENGTH:
            raise InputTooShortError(f"input length {n} below minimum {MIN_INPUT_LENGTH}")
        h = np.asarray(h, dtype=np.float64).reshape(-1)
        if h.shape[0] != batch:
            raise ShapeError(f"encode: {h.shape[0]} frequencies for batch of {batch}")

        p = self._params
        out = xin
        if cfg.use_cnn:
            for i in range(cfg.conv_layers):
                out = ad.conv1d(out, p[f"conv{i}.weight"], p[f"conv{i}.bias"])
                out = ad.elu(out)
                out = ad.maxpool1d(out, cfg.pool_window, cfg.pool_stride)
        out = ad.swap_channels_time(out)
        layers = [(p[f"lstm{i}.w"], p[f"lstm{i}.u"], p[f"lstm{i}.b"])
                  for i in range(cfg.lstm_layers)]
        out = ad.lstm_forward(out, layers)
        pooled = ad.mean_pool_time(out)
        z = ad.concat_scalar(pooled, Tensor(h))
        for extra in extras:
            z = ad.concat_scalar(z, Tensor(extra))
        return z

    def head(self, z: Tensor, training: bool | None = None) -> Tensor:
        """Stage 3: fully connected blocks from pooled features to estimates."""
        cfg = self.config
        training = self.training if training is None else training
        p = self._params
        for i in range(cfg.fc_layers + 1):
            z = ad.linear(z, p[f"fc{i}.weight"], p[f"fc{i}.bias"])
            if i == 0:
                z = ad.batchnorm(z, p["bn.gamma"], p["bn.beta"], self.bn_state, training)
            if i < cfg.fc_layers:
                z = ad.elu(z)
        return z

    def forward(self, x, h, training: bool | None = None) -> Tensor:
        """Estimates for an equal-length batch: (B, N) values, (B,)
        frequencies -> (B, M)."""
        return self.head(self.encode(x, h), training)

    def predict(self, values_list, h_list) -> np.ndarray:
        """Inference estimates, one sample at a time.

        Processing singly makes per-sample outputs bit-identical regardless
        of how callers would group samples.
        """
        if len(values_list) != len(h_list):
            raise ShapeError(f"{len(values_list)} sequences vs {len(h_list)} frequencies")
        rows = []
        for values, h in zip(values_list, h_list):
            values = np.asarray(values, dtype=np.float64).reshape(1, -1)
            out = self.forward(values, np.asarray([h]), training=False)
            rows.append(out.data[0])
        return np.stack(rows) if rows else np.zeros((0, self.config.n_outputs))

    # -- persistence ----------------------------------------------------------

    def state_tensors(self) -> dict[str, np.ndarray]:
        tensors = {name: p.data for name, p in self._params.items()}
        tensors["bn.running_mean"] = self.bn_state.mean
        tensors["bn.running_var"] = self.bn_state.var
        return tensors

    def save(self, path, adam: AdamState | None = None) -> None:
        sections = {SECTION_CONFIG: self.config.to_json().encode("utf-8")}
        if adam is not None:
            blob = {"meta": np.array([adam.step, adam.lr, adam.beta1, adam.beta2, adam.eps])}
            for i, (m, v) in enumerate(zip(adam.m, adam.v)):
                blob[f"m.{i}"] = m
                blob[f"v.{i}"] = v
            sections[SECTION_ADAM] = pack_tensors(blob)
        write_checkpoint(path, self.state_tensors(), sections)

    @classmethod
    def load(cls, path) -> tuple["PEnetModel", AdamState | None]:
        tensors, sections = read_checkpoint(path)
        if SECTION_CONFIG not in sections:
            raise ValueError("checkpoint has no embedded config section")
        config = PEnetConfig.from_json(sections[SECTION_CONFIG].decode("utf-8"))
        model = cls(config, seed=0)
        for name, param in model._params.items():
            if name not in tensors:
                raise ValueError(f"checkpoint is missing tensor {name!r}")
            if tensors[name].shape != param.data.shape:
                raise ShapeError(
                    f"checkpoint tensor {name!r} has shape {tensors[name].shape},"
                    f" config implies {param.data.shape}"
                )
            param.data = np.ascontiguousarray(tensors[name])
        model.bn_state.mean[:] = tensors["bn.running_mean"]
        model.bn_state.var[:] = tensors["bn.running_var"]
        adam = None
        if SECTION_ADAM in sections:
            blob = unpack_tensors(sections[SECTION_ADAM])
            meta = blob["meta"]
            params = model.parameters()
            adam = AdamState(
                lr=float(meta[1]), beta1=float(meta[2]), beta2=float(meta[3]),
                eps=float(meta[4]), step=int(meta[0]),
                m=[blob[f"m.{i}"] for i in range(len(params))],
                v=[blob[f"v.{i}"] for i in range(len(params))],
            )
        model.eval()
        return model, adam

    def describe(self) -> dict:
        return {
            "config": json.loads(self.config.to_json()),
            "parameter_count": self.count_parameters(),
        }
