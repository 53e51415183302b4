"""Run manifests: config snapshot, stage ledger, artifact hashes.

The manifest is the resume point and the audit trail. It deliberately
carries no timestamps and only run-dir-relative paths, so two runs with
identical inputs and seeds produce byte-identical manifests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from .ioutils import read_json, sha256_file, write_json

STAGES = ("segment", "reformat", "cycle", "filter", "export")

STATUS_PENDING = "pending"
STATUS_RUNNING = "running"
STATUS_DONE = "done"
STATUS_FAILED = "failed"

MANIFEST_NAME = "manifest.json"


class ManifestError(ValueError):
    pass


@dataclass
class StageEntry:
    status: str = STATUS_PENDING
    artifacts: List[str] = field(default_factory=list)  # run-dir-relative
    counters: Dict[str, int] = field(default_factory=dict)
    error: Optional[str] = None

    def to_record(self) -> dict:
        return {"status": self.status, "artifacts": self.artifacts,
                "counters": self.counters, "error": self.error}

    @classmethod
    def from_record(cls, rec: dict) -> "StageEntry":
        return cls(status=rec["status"], artifacts=list(rec["artifacts"]),
                   counters=dict(rec["counters"]), error=rec.get("error"))


@dataclass
class RunManifest:
    run_id: str
    config_snapshot: dict
    template_hashes: Dict[str, str]
    stages: Dict[str, StageEntry]
    artifact_hashes: Dict[str, str] = field(default_factory=dict)

    @classmethod
    def new(cls, run_id: str, config_snapshot: dict,
            template_hashes: Dict[str, str]) -> "RunManifest":
        return cls(run_id=run_id, config_snapshot=config_snapshot,
                   template_hashes=dict(template_hashes),
                   stages={name: StageEntry() for name in STAGES})

    def stage(self, name: str) -> StageEntry:
        if name not in self.stages:
            raise ManifestError(f"unknown stage {name!r}")
        return self.stages[name]

    def start_stage(self, name: str) -> None:
        self.stage(name).status = STATUS_RUNNING

    def finish_stage(self, name: str, run_dir: Path, artifacts: List[Path],
                     counters: Dict[str, int]) -> None:
        entry = self.stage(name)
        rels = []
        for path in artifacts:
            rel = str(Path(path).relative_to(run_dir))
            rels.append(rel)
            self.artifact_hashes[rel] = sha256_file(path)
        entry.artifacts = sorted(rels)
        entry.counters = dict(sorted(counters.items()))
        entry.status = STATUS_DONE
        entry.error = None

    def fail_stage(self, name: str, error: str) -> None:
        entry = self.stage(name)
        entry.status = STATUS_FAILED
        entry.error = error

    def is_done(self, name: str) -> bool:
        return self.stage(name).status == STATUS_DONE

    def verify_artifacts(self, run_dir: Path) -> List[str]:
        """Relative paths whose content no longer matches the recorded hash."""
        bad = []
        for rel, digest in sorted(self.artifact_hashes.items()):
            target = run_dir / rel
            if not target.is_file() or sha256_file(target) != digest:
                bad.append(rel)
        return bad

    def to_record(self) -> dict:
        return {
            "run_id": self.run_id,
            "config_snapshot": self.config_snapshot,
            "template_hashes": dict(sorted(self.template_hashes.items())),
            "stages": {name: self.stages[name].to_record() for name in STAGES},
            "artifact_hashes": dict(sorted(self.artifact_hashes.items())),
        }

    def save(self, run_dir: Path) -> Path:
        path = Path(run_dir) / MANIFEST_NAME
        write_json(path, self.to_record())
        return path

    @classmethod
    def load(cls, run_dir: Path) -> "RunManifest":
        path = Path(run_dir) / MANIFEST_NAME
        if not path.is_file():
            raise ManifestError(f"no manifest at {path}")
        rec = read_json(path)
        manifest = cls(run_id=rec["run_id"], config_snapshot=rec["config_snapshot"],
                       template_hashes=dict(rec["template_hashes"]),
                       stages={name: StageEntry.from_record(rec["stages"][name])
                               for name in STAGES},
                       artifact_hashes=dict(rec["artifact_hashes"]))
        return manifest
