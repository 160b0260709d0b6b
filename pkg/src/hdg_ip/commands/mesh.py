"""
HDG-IP Solver - Mesh Command

Handles:
- hdg-ip mesh: writes mesh families to the data directory
  (annulus_h<n>.msh2 for the holed square, square_<shape>_h<n>.msh2 otherwise)
"""

import argparse
from pathlib import Path
from typing import Any, List, Literal, Optional

from pydantic import BaseModel, Field

from hdg_ip.config import get_settings
from hdg_ip.errors import InvalidArgumentError
from hdg_ip.services.mesh import Mesh, generate_holed_square, generate_structured
from hdg_ip.services.mesh_io import write_mesh


class MeshRequest(BaseModel):
    """Mesh family to generate."""

    family: Literal["holed", "square"] = "holed"
    shape: Literal["tri", "quad"] = "quad"
    levels: List[int] = Field(default_factory=lambda: [4, 8, 16, 32], min_length=1)
    out: Optional[Path] = None


def mesh_filename(family: str, n: int, shape: str = "quad") -> str:
    if family == "holed":
        return f"annulus_h{n}.msh2"
    return f"square_{shape}_h{n}.msh2"


def generate(request: MeshRequest) -> List[Path]:
    out_dir = request.out if request.out is not None else get_settings().data_dir
    if out_dir is None:
        raise InvalidArgumentError("no target directory: pass --out or set HDG_DATA_DIR")
    paths = []
    for n in request.levels:
        mesh: Mesh
        if request.family == "holed":
            mesh = generate_holed_square(n)
        else:
            mesh = generate_structured(n, n, shape=request.shape)
        path = write_mesh(mesh, out_dir / mesh_filename(request.family, n, request.shape))
        paths.append(path)
    return paths


def add_parser(subparsers: Any) -> None:
    parser = subparsers.add_parser("mesh", help="Write mesh files for the test geometries")
    parser.add_argument("--family", choices=["holed", "square"], default="holed")
    parser.add_argument("--shape", choices=["tri", "quad"], default="quad")
    parser.add_argument(
        "--levels",
        default="4,8,16,32",
        type=lambda s: [int(t) for t in s.split(",") if t.strip()],
    )
    parser.add_argument("--out", type=Path, help="Target directory (default: HDG_DATA_DIR)")
    parser.set_defaults(func=handle)


def handle(args: argparse.Namespace) -> int:
    request = MeshRequest(family=args.family, shape=args.shape, levels=args.levels, out=args.out)
    for path in generate(request):
        print(path)
    return 0
