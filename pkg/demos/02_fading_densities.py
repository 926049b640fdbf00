"""Closed-form fading densities against their quadrature oracles.

Fits the finite Gamma mixture to the Gamma-Gamma law, assembles the
combined and cascade densities, and checks them against direct
convolution quadrature.  Saves a comparison figure when matplotlib is
importable; otherwise prints the numbers.
"""

import math

import numpy as np

from rissec import analysis as an
from rissec import channel as ch

cfg = ch.default_config(100, bits=1)
tu = cfg.turbulence_u

print("mixture fit to the Gamma-Gamma law")
for order in (10, 20, 30):
    approx = an.mixture_gamma_fit(tu.alpha, tu.beta, order)
    t = np.linspace(0.05, 4.0, 400)
    exact = ch.turbulence_pdf(t, tu.alpha, tu.beta)
    err = np.max(np.abs(an.mixture_turbulence_pdf(t, approx) - exact))
    print(f"  order {order:2d}: max abs density error {err:.2e}")

approx = an.mixture_gamma_fit(tu.alpha, tu.beta, 30)
stats = an.equivalent_stats(100, cfg.phase_error)

total, _, _ = an.adaptive_quadrature(
    lambda h: an.combined_fading_pdf(h, approx, cfg.pointing_u), 1e-9, 0.7,
    rel_tol=1e-7,
)
print(f"\ncombined turbulence-pointing density integrates to {total:.8f}")

z = np.logspace(math.log10(0.003), math.log10(0.35), 120)
closed, flags = an.pdf_H_u(z, approx, cfg.pointing_u, stats, with_flags=True)
oracle = an.pdf_H_oracle(z, approx, cfg.pointing_u, stats, which="u")
print("cascade density at the N=100 operating point")
print(f"  {int(flags.sum())}/{z.size} points handled by the convolution "
      "fallback (the CLT amplitude is so concentrated there that the "
      "series cancels catastrophically, and the conditioning gate "
      "reroutes before that happens)")
print(f"  (the fallback is that convolution, so the two columns agree "
      f"to {np.max(np.abs(closed - oracle) / oracle):.1e} by construction)")

# a gentler corner of parameter space keeps the closed form in play:
# weak turbulence, wide beam, a loose 4-element combining amplitude
mild_approx = an.mixture_gamma_fit(1.5, 1.2, 4)
mild_pointing = ch.PointingModel(
    aperture_radius=0.01,
    beam_waist=0.06,
    jitter_std=0.005,
    collected_fraction=0.9,
    equivalent_beam_width=0.06,
    ratio=1.5,
)
mild_stats = an.EquivalentChannelStats(
    element_count=4,
    mode=ch.QUANTIZATION_ONLY,
    char_fn_1=1.0,
    char_fn_2=1.0,
    mean_c=1.0,
    mean_s=0.0,
    var_c=0.1,
    var_s=0.1,
    nakagami_m=2.5,
    nakagami_spread=1.0,
    eav_var=0.5,
)
z_mild = np.logspace(math.log10(0.01), math.log10(3.0), 120)
closed_s, flags_s = an.pdf_H_u(
    z_mild, mild_approx, mild_pointing, mild_stats, with_flags=True
)
oracle_s = an.pdf_H_oracle(z_mild, mild_approx, mild_pointing, mild_stats, which="u")
clean = ~flags_s
rel = np.abs(closed_s - oracle_s)[clean] / oracle_s[clean]
print("cascade density on a well-conditioned configuration")
print(f"  {int(clean.sum())}/{z_mild.size} points on the closed-form fast path")
print(f"  worst relative gap on those points: {rel.max():.2e}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib not importable; skipping the figure")
else:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    t = np.linspace(0.01, 4.0, 400)
    ax1.plot(t, ch.turbulence_pdf(t, tu.alpha, tu.beta), label="Gamma-Gamma")
    ax1.plot(t, an.mixture_turbulence_pdf(t, approx), "--", label="mixture fit")
    ax1.set_xlabel("turbulence gain")
    ax1.set_ylabel("density")
    ax1.legend()
    ax2.loglog(z, oracle, label="convolution oracle")
    ax2.loglog(z, closed, "--", label="closed form")
    ax2.set_xlabel("cascade amplitude")
    ax2.legend()
    fig.tight_layout()
    fig.savefig("demos/fading_densities.png", dpi=120)
    print("figure written to demos/fading_densities.png")
