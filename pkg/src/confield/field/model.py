"""The controllable scene field.

A spatial point is lifted into per-attribute hyper-space coordinates by
slicing surfaces that each see only their own control value, warped by a
code-conditioned deformation field, gated by learned region masks, and
finally decoded by a template radiance field. Region masks make attribute
channels spatially exclusive: that is what decouples the controls.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..autodiff import (
    MlpSpec,
    Tensor,
    as_tensor,
    concat,
    default_dtype,
    gather_rows,
    grouped_mlp_forward,
    init_mlp,
    mlp,
    mlp_forward,
    positional_encode,
    encoded_dim,
    stack,
)
from ..errors import ConfigurationError, DimensionError
from .config import FieldConfig

log = logging.getLogger(__name__)

_LOGIT_CLIP = 30.0


@dataclass
class FieldOutput:
    """Everything the field knows about a batch of points."""

    sigma: Tensor        # (B,) nonnegative density
    color: Tensor        # (B, 3) in [0, 1]
    masks: Tensor        # (B, N+1); column 0 is the background weight
    betas: Tensor        # (B, K) positive per-attribute uncertainty
    warped: Tensor       # (B, 3) deformed points
    w0: Tensor           # (B, d_hyper)
    ws: list             # K tensors (B, d_hyper)
    hyper: Tensor        # (B, (K+1) * d_hyper) masked concatenation
    mask_logits: Tensor  # (B, N) region logits before normalization


class Field:
    """Parameter container plus the evaluation pipeline."""

    def __init__(self, config: FieldConfig, num_frames: int,
                 rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng(0)
        self.config = config
        self.num_frames = num_frames
        c = config

        enc_x = encoded_dim(3, c.pe_spatial)
        enc_d = encoded_dim(3, c.pe_direction)
        enc_w = encoded_dim((c.num_attributes + 1) * c.d_hyper, c.pe_hyper)

        self.specs: dict[str, MlpSpec] = {}

        def add(spec: MlpSpec) -> MlpSpec:
            self.specs[spec.name] = spec
            return spec

        def net(name, in_dim, hidden, out_dim, skip_at=None):
            widths = tuple(hidden) + (out_dim,)
            acts = (c.hidden_activation,) * len(hidden) + ("none",)
            return add(MlpSpec(name, in_dim, widths, acts, skip_at))

        k = c.num_attributes
        self.attr_spec = add(MlpSpec(
            "attr", c.d_omega,
            c.attr_hidden + (k,),
            (c.hidden_activation,) * len(c.attr_hidden) + ("tanh",),
            skip_at=c.attr_skip,
        ))
        self.deform_spec = net("deform", enc_x + c.d_omega, c.deform_hidden, 3)
        self.slice_specs = [net("slice0", enc_x + c.d_omega, c.slice_hidden, c.d_hyper)]
        for i in range(1, k + 1):
            self.slice_specs.append(
                net(f"slice{i}", enc_x + 1, c.slice_hidden, c.d_hyper))
        self.mask_specs = []
        for n in range(1, c.num_regions + 1):
            p = len(c.attributes_of_region(n))
            self.mask_specs.append(net(
                f"mask{n}", enc_x + (1 + p) * c.d_hyper, c.mask_hidden, 1))
        self.uncert_specs = []
        for i in range(1, k + 1):
            self.uncert_specs.append(net(
                f"uncert{i}", enc_x + 2 * c.d_hyper, c.uncert_hidden, 1))
        self.template_spec = add(MlpSpec(
            "template", enc_x + enc_w,
            c.template_hidden,
            (c.hidden_activation,) * len(c.template_hidden),
            skip_at=c.template_skip,
        ))
        self.sigma_spec = net("sigma_head", c.template_hidden[-1], (), 1)
        self.color_spec = net("color_head", c.template_hidden[-1] + enc_d + c.d_psi,
                              (c.color_hidden,), 3)

        self.params: dict[str, Tensor] = {}
        small = {"deform", "sigma_head"} | {s.name for s in self.mask_specs}
        for name, spec in self.specs.items():
            scale = c.head_init_scale if name in small else 1.0
            self.params.update(init_mlp(spec, rng, final_scale=scale))
        # softplus(0) is not small: bias the density head so space starts
        # nearly transparent
        self.params["sigma_head.b0"].data[:] = c.sigma_bias_init
        self.params["codes.omega"] = Tensor(
            (0.01 * rng.standard_normal((num_frames, c.d_omega))).astype(default_dtype()),
            requires_grad=True)
        self.params["codes.psi"] = Tensor(
            (0.01 * rng.standard_normal((num_frames, c.d_psi))).astype(default_dtype()),
            requires_grad=True)

    # -- individual stages ---------------------------------------------------

    def encode_positions(self, x: Tensor) -> Tensor:
        return positional_encode(x, self.config.pe_spatial)

    def eval_attributes(self, omega: Tensor) -> Tensor:
        """Per-frame control values predicted from the deformation code."""
        if omega.shape[-1] != self.config.d_omega:
            raise DimensionError(f"omega dim {omega.shape[-1]} != {self.config.d_omega}")
        return mlp_forward(self.attr_spec, self.params, omega)

    def eval_deformation(self, x: Tensor, omega: Tensor,
                         enc_x: Tensor | None = None) -> Tensor:
        """Bounded residual warp x' = x + max_offset * tanh(offset(x, omega))."""
        enc_x = self.encode_positions(x) if enc_x is None else enc_x
        raw = mlp_forward(self.deform_spec, self.params, concat([enc_x, omega]))
        return x + raw.tanh() * self.config.max_offset

    def eval_slicing_surfaces(self, x: Tensor, alphas: Tensor, omega: Tensor,
                              enc_x: Tensor | None = None) -> tuple[Tensor, list[Tensor]]:
        """Hyper coordinates: w_i sees only (x, alpha_i); w_0 only (x, omega)."""
        enc_x = self.encode_positions(x) if enc_x is None else enc_x
        w0 = mlp_forward(self.slice_specs[0], self.params, concat([enc_x, omega]))
        ws = []
        for i in range(1, self.config.num_attributes + 1):
            a_i = alphas[:, i - 1:i]
            ws.append(mlp_forward(self.slice_specs[i], self.params, concat([enc_x, a_i])))
        return w0, ws

    def eval_masks(self, warped: Tensor, w0: Tensor, ws: list[Tensor],
                   enc_xp: Tensor | None = None) -> tuple[Tensor, Tensor]:
        """Region weights from a normalized exponential over N+1 logits.

        Each region network sees the warped point, w0, and only its own
        attributes' hyper coordinates; the background logit is pinned to 0,
        so the weights sum to 1 identically and m_0 = 1 - sum(m_n).
        Returns (masks (B, N+1), logits (B, N)).
        """
        c = self.config
        if len(ws) != c.num_attributes:
            raise ConfigurationError(
                f"expected {c.num_attributes} hyper components, got {len(ws)}")
        enc_xp = self.encode_positions(warped) if enc_xp is None else enc_xp
        logits = []
        for n in range(1, c.num_regions + 1):
            inputs = [enc_xp, w0] + [ws[i] for i in c.attributes_of_region(n)]
            logits.append(mlp_forward(self.mask_specs[n - 1], self.params, concat(inputs)))
        logit_mat = concat(logits, axis=-1)
        e = logit_mat.clip(-_LOGIT_CLIP, _LOGIT_CLIP).exp()
        denom = e.sum(axis=-1, keepdims=True) + 1.0
        background = 1.0 / denom
        masks = concat([background, e / denom], axis=-1)
        return masks, logit_mat

    def compose_hyperspace(self, w0: Tensor, ws: list[Tensor], masks: Tensor) -> Tensor:
        """Gate every hyper component by its region's mask and concatenate.

        Order is fixed: [w'_0, w'_1, ..., w'_K].
        """
        c = self.config
        parts = [w0 * masks[:, 0:1]]
        for i, w in enumerate(ws):
            region = c.region_of_attribute[i]
            parts.append(w * masks[:, region:region + 1])
        return concat(parts, axis=-1)

    def eval_template(self, warped: Tensor, hyper: Tensor, dirs: Tensor, psi: Tensor,
                      enc_xp: Tensor | None = None) -> tuple[Tensor, Tensor]:
        """Template radiance field: density from geometry only, color also
        from view direction and appearance code."""
        c = self.config
        if hyper.shape[-1] != (c.num_attributes + 1) * c.d_hyper:
            raise DimensionError(f"hyper dim {hyper.shape[-1]} is wrong")
        enc_xp = self.encode_positions(warped) if enc_xp is None else enc_xp
        enc_w = positional_encode(hyper, c.pe_hyper)
        feat = mlp_forward(self.template_spec, self.params, concat([enc_xp, enc_w]))
        sigma = mlp_forward(self.sigma_spec, self.params, feat).softplus()
        enc_d = positional_encode(dirs, c.pe_direction)
        color = mlp_forward(self.color_spec, self.params,
                            concat([feat, enc_d, psi])).sigmoid()
        return sigma.reshape(sigma.shape[0]), color

    def eval_uncertainty(self, warped: Tensor, w0: Tensor, w_i: Tensor, i: int,
                         enc_xp: Tensor | None = None) -> Tensor:
        """Positive noise scale for attribute i (1-based)."""
        if not 1 <= i <= self.config.num_attributes:
            raise ConfigurationError(f"attribute index {i} outside 1..K")
        enc_xp = self.encode_positions(warped) if enc_xp is None else enc_xp
        raw = mlp_forward(self.uncert_specs[i - 1], self.params,
                          concat([enc_xp, w0, w_i]))
        beta = raw.softplus() + self.config.beta_floor
        return beta.reshape(beta.shape[0])

    # -- full pipeline -----------------------------------------------------------

    def field_query(self, x: Tensor, dirs: Tensor, alphas: Tensor,
                    omega: Tensor, psi: Tensor,
                    with_uncertainty: bool = True,
                    mask_override: float | None = None) -> FieldOutput:
        """Slicing -> deformation -> masks -> composition -> template.

        Same-architecture per-attribute and per-region networks run as
        batched groups here; each group slice still sees only its own
        inputs, so the decoupling guarantees are unchanged. `mask_override`
        replaces learned masks with a constant weight (ablation mode:
        reduces the model to a coupled hyper-space field).
        """
        c = self.config
        b = x.shape[0]
        k = c.num_attributes
        d = c.d_hyper
        enc_x = self.encode_positions(x)

        # hyper coordinates: grouped H_i plus the code-conditioned H_0
        w0 = mlp_forward(self.slice_specs[0], self.params, concat([enc_x, omega]))
        enc_b = enc_x.broadcast_to((k,) + enc_x.shape)
        alpha_cols = alphas.transpose(1, 0).reshape(k, b, 1)
        ws_g = grouped_mlp_forward(self.slice_specs[1:], self.params,
                                   concat([enc_b, alpha_cols], axis=-1))

        warped = self.eval_deformation(x, omega, enc_x=enc_x)
        enc_xp = self.encode_positions(warped)
        enc_xp_k = enc_xp.broadcast_to((k,) + enc_xp.shape)

        # region mask logits; grouped when every region has the same number
        # of bound attributes, otherwise one network at a time
        region_attrs = [c.attributes_of_region(n) for n in range(1, c.num_regions + 1)]
        w0_n = w0.broadcast_to((c.num_regions,) + w0.shape)
        if len({len(a) for a in region_attrs}) == 1:
            own = stack([
                ws_g[list(attrs)].transpose(1, 0, 2).reshape(b, len(attrs) * d)
                for attrs in region_attrs])
            mask_in = concat([enc_xp.broadcast_to((c.num_regions,) + enc_xp.shape),
                              w0_n, own], axis=-1)
            logit_mat = grouped_mlp_forward(self.mask_specs, self.params, mask_in) \
                .reshape(c.num_regions, b).transpose(1, 0)
        else:
            cols = []
            for n, attrs in enumerate(region_attrs, start=1):
                inputs = [enc_xp, w0] + [ws_g[i] for i in attrs]
                cols.append(mlp_forward(self.mask_specs[n - 1], self.params,
                                        concat(inputs)))
            logit_mat = concat(cols, axis=-1)
        e = logit_mat.clip(-_LOGIT_CLIP, _LOGIT_CLIP).exp()
        denom = e.sum(axis=-1, keepdims=True) + 1.0
        masks = concat([1.0 / denom, e / denom], axis=-1)
        if mask_override is not None:
            const = np.full((b, c.num_regions + 1), mask_override, dtype=default_dtype())
            masks = as_tensor(const)

        # gate hyper coordinates by their region's mask and concatenate
        m_sel = stack([masks[:, r:r + 1] for r in c.region_of_attribute])
        gated = (ws_g * m_sel).transpose(1, 0, 2).reshape(b, k * d)
        hyper = concat([w0 * masks[:, 0:1], gated], axis=-1)

        sigma, color = self.eval_template(warped, hyper, dirs, psi, enc_xp=enc_xp)

        if with_uncertainty:
            unc_in = concat([enc_xp_k, w0.broadcast_to((k,) + w0.shape), ws_g], axis=-1)
            raw = grouped_mlp_forward(self.uncert_specs, self.params, unc_in)
            betas = raw.softplus().reshape(k, b).transpose(1, 0) + c.beta_floor
        else:
            betas = as_tensor(np.ones((b, k), dtype=default_dtype()))

        ws = [ws_g[i] for i in range(k)]
        return FieldOutput(sigma=sigma, color=color, masks=masks, betas=betas,
                           warped=warped, w0=w0, ws=ws, hyper=hyper,
                           mask_logits=logit_mat)

    def query_train(self, x: Tensor, dirs: Tensor, frame_idx: np.ndarray,
                    alphas_gt: np.ndarray, delta: np.ndarray,
                    with_uncertainty: bool = True,
                    mask_override: float | None = None) -> FieldOutput:
        """Training path: teacher-forced controls where labels exist.

        `alphas_gt`/`delta` are per-point rows aligned with `frame_idx`.
        Where delta=0 the attribute network's own prediction fills in.
        """
        omega = gather_rows(self.params["codes.omega"], frame_idx)
        psi = gather_rows(self.params["codes.psi"], frame_idx)
        if np.all(delta == 1.0):
            alphas = as_tensor(alphas_gt.astype(default_dtype()))
        else:
            pred = self.eval_attributes(omega)
            d = as_tensor(delta.astype(default_dtype()))
            alphas = as_tensor(alphas_gt.astype(default_dtype())) * d + pred * (1.0 - d)
        return self.field_query(x, dirs, alphas, omega, psi,
                                with_uncertainty=with_uncertainty,
                                mask_override=mask_override)

    def query_control(self, x: Tensor, dirs: Tensor, alphas: np.ndarray,
                      omega: np.ndarray | None = None,
                      psi: np.ndarray | None = None,
                      with_uncertainty: bool = False) -> FieldOutput:
        """Control path: explicit attribute vector, out-of-range values clamped."""
        c = self.config
        b = x.shape[0]
        d = dirs.data if isinstance(dirs, Tensor) else np.asarray(dirs)
        norms = np.linalg.norm(d, axis=-1)
        if np.any(np.abs(norms - 1.0) > 1e-3):
            raise DimensionError("query directions must be unit vectors")
        alphas = np.asarray(alphas, dtype=default_dtype())
        if np.any(alphas < -1.0) or np.any(alphas > 1.0):
            log.warning("control attributes outside [-1, 1]; clamping")
            alphas = np.clip(alphas, -1.0, 1.0)
        if alphas.ndim == 1:
            alphas = np.broadcast_to(alphas, (b, c.num_attributes)).copy()
        omega = np.zeros(c.d_omega) if omega is None else np.asarray(omega)
        psi = np.zeros(c.d_psi) if psi is None else np.asarray(psi)
        omega_b = np.broadcast_to(omega.astype(default_dtype()), (b, c.d_omega)).copy()
        psi_b = np.broadcast_to(psi.astype(default_dtype()), (b, c.d_psi)).copy()
        return self.field_query(x, as_tensor(dirs), as_tensor(alphas),
                                as_tensor(omega_b), as_tensor(psi_b),
                                with_uncertainty=with_uncertainty)

    # -- parameter bookkeeping ------------------------------------------------------

    def parameter_names(self) -> list[str]:
        """Declaration order used by the checkpoint format."""
        names = []
        for spec in self.specs.values():
            for i in range(len(spec.widths)):
                names.append(f"{spec.name}.W{i}")
                names.append(f"{spec.name}.b{i}")
        names.append("codes.omega")
        names.append("codes.psi")
        return names

    def network_parameter_names(self, network: str) -> list[str]:
        return [n for n in self.parameter_names() if n.startswith(network + ".")]
