"""Analytic floating-point-operation accounting for both sampling pipelines.

Two modes share the same composition formulas. Paper mode plugs in published
per-component costs (held below as data, in GFLOPs) and checks the composed
totals against the published totals. Toy mode counts the actual arithmetic of
this package's denoiser/tokenizer from layer dimensions, with one
multiply-accumulate counted as 2 operations.

Latent pipeline: T denoiser passes (2T under guidance) plus one decoder pass.
Pixel-loop pipeline: T decoder passes and T-1 encoder passes, all doubled
under guidance.
"""

from dataclasses import dataclass

from .errors import ConfigError


@dataclass(frozen=True)
class ComponentCost:
    name: str
    params: float
    flops_per_forward: float

    def __post_init__(self):
        if self.params < 0 or self.flops_per_forward < 0:
            raise ValueError("component counts must be >= 0")


@dataclass
class FlopReport:
    steps: int
    cfg_enabled: bool
    subtotals: list  # [(component name, flops)]
    total: float


# Published per-forward-pass component costs at full scale (GFLOPs / params).
PAPER_COMPONENTS = {
    "pixel_loop_encoder": ComponentCost("pixel_loop_encoder", 682e6, 918.0),
    "pixel_loop_decoder": ComponentCost("pixel_loop_decoder", 702e6, 977.0),
    "latent_denoiser": ComponentCost("latent_denoiser", 674e6, 230.0),
    "latent_decoder": ComponentCost("latent_decoder", 415e6, 213.0),
}

# Published totals (GFLOPs) the composed pipelines are checked against.
PAPER_TOTAL_PIXEL_LOOP_T4_CFG = 13326.0
PAPER_TOTAL_LATENT_T6_CFG = 2969.0

# Published small-dataset totals (GFLOPs, no guidance) by step count.
PAPER_SMALL_LATENT_TOTALS = {2: 302.0, 4: 390.0, 6: 478.0}
PAPER_SMALL_PIXEL_LOOP_TOTALS = {2: 1965.0, 4: 4554.0, 6: 7144.0}


def flops_latent_pipeline(steps, cfg_enabled, denoiser, decoder):
    if steps < 1:
        raise ConfigError(f"steps must be >= 1, got {steps}")
    mult = 2 if cfg_enabled else 1
    den = steps * mult * denoiser.flops_per_forward
    dec = decoder.flops_per_forward
    return FlopReport(steps, cfg_enabled,
                      [(denoiser.name, den), (decoder.name, dec)], den + dec)


def flops_pixel_loop_pipeline(steps, cfg_enabled, encoder, decoder):
    if steps < 1:
        raise ConfigError(f"steps must be >= 1, got {steps}")
    mult = 2 if cfg_enabled else 1
    dec = mult * steps * decoder.flops_per_forward
    enc = mult * (steps - 1) * encoder.flops_per_forward
    return FlopReport(steps, cfg_enabled,
                      [(decoder.name, dec), (encoder.name, enc)], dec + enc)


def affine_flops(n_in, n_out):
    """Dense affine layer: 2*n_in*n_out multiply-accumulates plus the bias add."""
    return 2 * n_in * n_out + n_out


def affine_chain_flops(dims):
    """FLOPs of a chain of affine layers given [d0, d1, ..., dn]; empty -> 0."""
    return sum(affine_flops(a, b) for a, b in zip(dims[:-1], dims[1:]))


def flops_toy_model(obj):
    """Exact affine-arithmetic count for a DenoiserParameters or LinearTokenizer."""
    from .denoiser import DenoiserParameters
    from .tokenizer import LinearTokenizer

    if isinstance(obj, DenoiserParameters):
        c = obj.cfg
        total = affine_flops(c.d_latent, c.hidden)
        total += c.blocks * 2 * affine_flops(c.hidden, c.hidden)
        total += affine_flops(c.hidden, c.d_latent)
        return ComponentCost("denoiser", obj.n_params(), float(total))
    if isinstance(obj, LinearTokenizer):
        # one matrix product plus the scalar rescale
        total = 2 * obj.d_latent * obj.d_data + obj.d_data
        return ComponentCost("decoder", int(obj.w.size) + 1, float(total))
    raise TypeError(f"cannot count FLOPs for {type(obj).__name__}")


def solve_small_latent_components(totals=PAPER_SMALL_LATENT_TOTALS):
    """Per-pass denoiser/decoder GFLOPs from two published no-guidance totals.

    total(T) = T*denoiser + decoder, solved from the T=2 and T=4 rows.
    """
    t2, t4 = totals[2], totals[4]
    den = (t4 - t2) / 2.0
    dec = t2 - 2.0 * den
    return (ComponentCost("latent_denoiser_small", 130e6, den),
            ComponentCost("latent_decoder_small", 0, dec))


def solve_small_pixel_loop_components(totals=PAPER_SMALL_PIXEL_LOOP_TOTALS):
    """Per-pass decoder/encoder GFLOPs from two published no-guidance totals.

    total(T) = T*decoder + (T-1)*encoder, solved from the T=2 and T=4 rows.
    """
    t2, t4 = totals[2], totals[4]
    # 2d + e = t2 ; 4d + 3e = t4
    d = (3.0 * t2 - t4) / 2.0
    e = t2 - 2.0 * d
    return (ComponentCost("pixel_loop_encoder_small", 0, e),
            ComponentCost("pixel_loop_decoder_small", 0, d))
