"""
Writes every certified construction to lw_lab/data/certified/<family>/, the same layout
`lw-lab gen --out` produces, plus the no-pure-equilibrium instance.
"""
import sys
from pathlib import Path

BASE_DIR = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(BASE_DIR))

from lw_lab.core.logging import logger, setup_logging  # noqa: E402
from lw_lab.services.game_core import dump_instance  # noqa: E402
from lw_lab.services.instances import certified_suite, gen_no_pure_ne  # noqa: E402
from lw_lab.utils.io import dump_model, write_text  # noqa: E402

OUT_DIR = BASE_DIR / "lw_lab" / "data" / "certified"


def export_suite(out_dir: Path = OUT_DIR) -> list[Path]:
    written = []
    for cert in certified_suite():
        target = out_dir / f"{cert.family.value}-{cert.mechanism.value}"
        target.mkdir(parents=True, exist_ok=True)
        dump_instance(cert.game, target / "instance.json")
        write_text(dump_model(cert.profile), target / "profile.json")
        write_text(dump_model(cert), target / "certificate.json")
        print(f"  {cert.instance_id:<40} OPT={cert.claimed_opt:g} LW={cert.claimed_eq_lw:g} -> {target}")
        written.append(target)

    target = out_dir / "no-pne"
    target.mkdir(parents=True, exist_ok=True)
    dump_instance(gen_no_pure_ne(), target / "instance.json")
    print(f"  {'no-pne(m=3)':<40} -> {target}")
    written.append(target)

    logger.info(f"Certified suite exported | directories={len(written)} | root={out_dir}")
    return written


def main() -> None:
    setup_logging()
    print(f"\nExporting certified constructions to {OUT_DIR}")
    export_suite()
    print("Done")


if __name__ == "__main__":
    main()
