"""
Demo: how few paths do the weighted estimators actually need?
=============================================================

Weighted Greek estimators have a reputation for high variance (the weight
multiplies the payoff by a stochastic integral).  This script measures that
directly: it sweeps the path count from 250 to 10000 under the hybrid model
and prints each estimate with its 3-SE band next to a 100k-path reference.

The punchline is that even the 250-path estimates bracket the reference --
the bands are wide, but the point estimates are not wild.
"""

import hsv_greeks as hg

SWEEP = (250, 500, 1000, 2000, 5000, 10_000)


def greek_estimates(paths, call, s0, maturity):
    return {
        "delta": hg.delta(paths, call, s0),
        "rho": hg.rho(paths, call, maturity),
        "vega": hg.vega(paths, call, maturity),
    }


def main():
    print("Convergence of the weighted estimators with path count")
    print("=" * 58)

    model = hg.heston_vasicek_model(
        hg.HestonVasicekParams(kappa=2.0, theta=0.04, sigma_vol=0.04,
                               a=0.02, b=0.08, k=0.002),
        hg.CorrelationTriple(rho12=-0.8, rho13=0.5, rho23=0.02))
    init = hg.InitialState(s0=100.0, v0=0.04, r0=0.02)
    call = hg.Payoff("call", strike=100.0)

    print("\nbuilding the 100k-path reference ...")
    big = hg.SimConfig(n_paths=100_000, n_steps=252, maturity=1.0, seed=999)
    ref_paths = hg.simulate_paths(model, init, big)
    reference = {k: v.value for k, v in
                 greek_estimates(ref_paths, call, init.s0, 1.0).items()}
    for k, v in reference.items():
        print(f"  reference {k:<6} = {v:.5f}")

    for greek in ("delta", "rho", "vega"):
        print(f"\n{greek}:")
        print(f"  {'paths':>7} {'estimate':>10} {'3*se':>9} "
              f"{'band contains ref?':>20}")
        for n in SWEEP:
            cfg = hg.SimConfig(n_paths=n, n_steps=252, maturity=1.0,
                               seed=12_345)
            paths = hg.simulate_paths(model, init, cfg)
            est = greek_estimates(paths, call, init.s0, 1.0)[greek]
            band = 3.0 * est.std_error
            inside = abs(est.value - reference[greek]) <= band
            print(f"  {n:>7} {est.value:>10.4f} {band:>9.4f} "
                  f"{'yes' if inside else 'NO':>20}")

    print("\nthe same sweep is available from the command line:")
    print("  hsv-greeks converge --config <file>   # sweep=250,...,10000")


if __name__ == "__main__":
    main()
