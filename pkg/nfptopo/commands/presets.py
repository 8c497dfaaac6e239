"""
preset-list 子命令
"""

import argparse

from ..services.presets import COMPLIANT_SCALE, OUTPUT_SPRING, PRESETS, STIFF_SCALE


def register(subparsers):
    parser = subparsers.add_parser("preset-list", help="列出内置预设问题")
    parser.set_defaults(handler=handle)
    return parser


def handle(args: argparse.Namespace) -> int:
    for preset in PRESETS.values():
        counts = "x".join(str(c) for c in preset.counts)
        scale = COMPLIANT_SCALE if preset.kind == "compliant" else STIFF_SCALE
        extra = f", k_a={OUTPUT_SPRING:g}" if preset.kind == "compliant" else ""
        print(
            f"{preset.name:<14} {preset.kind:<10} {counts:<10} vf={preset.volume_fraction:<5g} "
            f"{preset.neighborhood}(ls={preset.ls}) mu={scale:g}{extra}  {preset.description}"
        )
    return 0
