"""
HDG-IP Solver - Stabilization Table Command

Handles:
- hdg-ip stabilization-table: samples of the Additive and Scharfetter-Gummel
  amplification functions as CSV
"""

import argparse
import logging
from pathlib import Path
from typing import Any

import numpy as np

from hdg_ip.services.stabilization import amplification_table

logger = logging.getLogger(__name__)


def add_parser(subparsers: Any) -> None:
    parser = subparsers.add_parser(
        "stabilization-table", help="Tabulate |A|_add(theta s) and |A|_sg(theta s)"
    )
    parser.add_argument(
        "--thetas",
        default="0.5,1,1.5,2",
        type=lambda s: [float(t) for t in s.split(",") if t.strip()],
    )
    parser.add_argument("--s-max", dest="s_max", type=float, default=10.0)
    parser.add_argument("--points", type=int, default=201)
    parser.add_argument("--out", type=Path, default=Path("stabilization.csv"))
    parser.set_defaults(func=handle)


def handle(args: argparse.Namespace) -> int:
    s_values = np.linspace(-args.s_max, args.s_max, args.points)
    table = amplification_table(args.thetas, s_values)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(args.out, index=False, float_format="%.10e")
    logger.info(f"Wrote {len(table)} samples to {args.out}")
    return 0
