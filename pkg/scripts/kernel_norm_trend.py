"""Discrete L^2(sigma) norms of polynomial-kernel operators against the degree ell."""

import argparse

from siolab.geometry import DomainSpec, build_mesh
from siolab.kernels import Polynomial, PolyKernel, kernel_bound
from siolab.operators import OperatorSpec, l2_operator_norm

DOMAINS = {"disk": DomainSpec.disk(), "ellipse": DomainSpec.ellipse(), "star": DomainSpec.star()}
KERNELS = {1: "x", 3: "x^3 - 3*x*y^2", 5: "x^5 - 10*x^3*y^2 + 5*x*y^4", 7: "x^7 - 21*x^5*y^2 + 35*x^3*y^4 - 7*x*y^6"}


def normalized_kernel(ell: int) -> PolyKernel:
    """Re(z^ell) / |z|^(ell+1), scaled to unit L^1 norm on the circle."""
    P = Polynomial.parse(KERNELS[ell], 2)
    return PolyKernel(P * (1 / kernel_bound(PolyKernel(P))[1]))


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--resolutions", type=int, nargs="+", default=[256, 512])
    p.add_argument("--degrees", type=int, nargs="+", default=[1, 3, 5], choices=sorted(KERNELS))
    p.add_argument("--domains", nargs="+", default=list(DOMAINS), choices=list(DOMAINS))
    args = p.parse_args()
    print("domain,N,ell,l2_norm")
    for name in args.domains:
        for N in args.resolutions:
            mesh = build_mesh(DOMAINS[name], N)
            for ell in args.degrees:
                op = OperatorSpec("poly_kernel", mesh, kernel=normalized_kernel(ell))
                print(f"{name},{N},{ell},{l2_operator_norm(op):.6g}")
