"""Write a boundary mesh as CSV (t, x, y[, z], w, nx, ny[, nz])."""

import argparse
import json

from siolab.geometry import DomainSpec, build_mesh

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("domain", help='JSON domain table, e.g. \'{"kind": "ellipse", "a": 2, "b": 1}\'')
    p.add_argument("N", type=int)
    p.add_argument("output")
    args = p.parse_args()
    build_mesh(DomainSpec.from_dict(json.loads(args.domain)), args.N).to_csv(args.output)
