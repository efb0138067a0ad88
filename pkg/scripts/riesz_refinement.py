"""Seminorm of R_1 1 in C^omega, omega = t^alpha, across domains and resolutions."""

import argparse

from siolab.geometry import DomainSpec, build_mesh
from siolab.growth import GrowthFunction
from siolab.holder import seminorm
from siolab.operators import riesz_direct

DOMAINS = {
    "disk": DomainSpec.disk(),
    "ellipse": DomainSpec.ellipse(),
    "star": DomainSpec.star(),
    "teardrop": DomainSpec.teardrop(),
}

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--resolutions", type=int, nargs="+", default=[256, 512, 1024, 2048, 4096])
    p.add_argument("--domains", nargs="+", default=list(DOMAINS), choices=list(DOMAINS))
    args = p.parse_args()
    g = GrowthFunction.power(args.alpha)
    print("domain,N,seminorm")
    for name in args.domains:
        for N in args.resolutions:
            r1 = riesz_direct(build_mesh(DOMAINS[name], N))[0]
            print(f"{name},{N},{seminorm(r1, g).seminorm:.6g}")
