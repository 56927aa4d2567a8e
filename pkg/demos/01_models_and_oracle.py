"""Gallery models and the enumeration oracle.

Run: python demos/01_models_and_oracle.py
"""
from bellsim import exact_report, gallery_model, gallery_names, validate_model
from bellsim.model import SETTING_PAIRS

# Every bundled model is a TOML file; loading validates it.
for name in gallery_names():
    m = gallery_model(name)
    print(f"{name:<22} {m.variant}  |Lambda_xy| = {m.support.states_per_pair:>5}  "
          f"zeros: {m.has_zeros()!s:<5} valid: {validate_model(m).ok}")

print()

# The oracle sums over every hidden state. Post-selected (conditional) and
# raw (zeros kept as 0) CHSH values can differ a lot when detection depends
# on the hidden variables.
print(f"{'model':<22} {'S_max | coinc':>14} {'S_max raw':>10}")
for name in gallery_names():
    rep = exact_report(gallery_model(name))
    print(f"{name:<22} {rep.conditional_chsh()[1]:>14.6f} {rep.raw_chsh()[1]:>10.6f}")

# detection_gated: Alice only clicks when her setting matches a guess carried
# by the source, so the coincidences select a setting-dependent sub-ensemble.
rep = exact_report(gallery_model("detection_gated"))
for s in SETTING_PAIRS:
    p = rep[s]
    print(f"xy={s}  P(coinc)={p.p_coinc:.4f}  E(ab|coinc)={p.e_ab:+.4f}  E(ab) raw={p.raw_e_ab:+.4f}")
