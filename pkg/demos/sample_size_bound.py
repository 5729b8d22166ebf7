"""How many samples does the uniform gap estimate ask for?

The estimate combines the diameter of the feasible set, a sub-Gaussian
constant and a Lipschitz constant of the gradients with a covering number
of the feasible set.  The constants below are illustrative and are not
computed from the PDE.  A polynomial covering model shows how quickly
the requirement grows as the target accuracy shrinks, compared with the
plain 1/eps^2 growth of a singleton set.
"""
from saacontrol.bounds import BoundInputs, parse_covering, sample_size_bound

r_ad, tau, L = 2.0, 0.05, 1.0
models = {"const:1": "singleton set", "poly:1,2": "covering ~ nu^-2"}

print(f"{'eps':>8}" + "".join(f"{label:>20}" for label in models.values()))
for eps in (1e-1, 5e-2, 2e-2, 1e-2, 5e-3):
    row = [sample_size_bound(BoundInputs(r_ad, tau, L, parse_covering(m)), eps) for m in models]
    print(f"{eps:>8.0e}" + "".join(f"{n:>20,d}" for n in row))
print("\nsame numbers from the command line, e.g.")
print("  saacontrol bound --r 2 --tau 0.05 --L 1 --eps 0.01 --covering poly:1,2")
