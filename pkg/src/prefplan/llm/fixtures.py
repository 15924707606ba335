"""Record/replay store: one JSON document per prompt, keyed by the prompt hash."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from prefplan.llm.prompt import canonical, prompt_hash


class FixtureError(Exception):
    pass


class MissingFixture(FixtureError):
    def __init__(self, digest: str):
        self.digest = digest
        super().__init__(f"no fixture recorded for prompt {digest[:16]}")


class FixtureCollision(FixtureError):
    pass


@dataclass(frozen=True)
class Fixture:
    prompt_hash: str
    prompt_text: str
    response_text: str
    candidate_scores: tuple[float, ...] | None = None

    def to_dict(self) -> dict:
        out = {
            "prompt_hash": self.prompt_hash,
            "prompt_text": self.prompt_text,
            "response_text": self.response_text,
        }
        if self.candidate_scores is not None:
            out["candidate_scores"] = list(self.candidate_scores)
        return out

    @classmethod
    def from_dict(cls, doc: dict, where: str = "") -> Fixture:
        try:
            fx = cls(
                str(doc["prompt_hash"]),
                str(doc["prompt_text"]),
                str(doc["response_text"]),
                None
                if doc.get("candidate_scores") is None
                else tuple(float(x) for x in doc["candidate_scores"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise FixtureError(f"{where}: malformed fixture ({e})") from e
        if prompt_hash(fx.prompt_text) != fx.prompt_hash:
            raise FixtureError(f"{where}: prompt_hash does not match prompt_text")
        return fx


class FixtureStore:
    """Directory of ``<key>.json`` files; the key defaults to the prompt hash."""

    def __init__(self, root):
        self.root = Path(root)
        self._index: dict[str, list[Fixture]] | None = None

    def _load(self) -> dict[str, list[Fixture]]:
        if self._index is None:
            index: dict[str, list[Fixture]] = {}
            if self.root.is_dir():
                for f in sorted(self.root.glob("*.json")):
                    try:
                        doc = json.loads(f.read_text(encoding="utf-8"))
                    except json.JSONDecodeError as e:
                        raise FixtureError(f"{f}: invalid JSON: {e}") from e
                    fx = Fixture.from_dict(doc, str(f))
                    index.setdefault(fx.prompt_hash, []).append(fx)
            self._index = index
        return self._index

    def __len__(self):
        return sum(len(v) for v in self._load().values())

    def __iter__(self):
        for group in self._load().values():
            yield from group

    def lookup(self, prompt_text: str) -> Fixture:
        text = canonical(prompt_text)
        digest = prompt_hash(text)
        for fx in self._load().get(digest, []):
            if canonical(fx.prompt_text) == text:
                return fx
        raise MissingFixture(digest)

    def record(self, prompt_text: str, response_text: str, candidate_scores=None, key: str | None = None) -> Fixture:
        """Write a fixture atomically; an existing entry with a different prompt is a collision."""
        text = canonical(prompt_text)
        fx = Fixture(
            prompt_hash(text),
            text,
            response_text,
            None if candidate_scores is None else tuple(float(x) for x in candidate_scores),
        )
        name = key or fx.prompt_hash
        if not name.replace("-", "").replace("_", "").isalnum():
            raise FixtureError(f"invalid fixture key {name!r}")
        for other in self._load().get(fx.prompt_hash, []):
            if canonical(other.prompt_text) != text and key is None:
                raise FixtureCollision(
                    f"hash {fx.prompt_hash[:16]} already used by a different prompt; pass an explicit key"
                )
        path = self.root / f"{name}.json"
        if path.exists():
            old = Fixture.from_dict(json.loads(path.read_text(encoding="utf-8")), str(path))
            if canonical(old.prompt_text) != text:
                raise FixtureCollision(f"{path} holds a different prompt")
        self.root.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(fx.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
        group = [f for f in self._load().get(fx.prompt_hash, []) if canonical(f.prompt_text) != text]
        self._load()[fx.prompt_hash] = group + [fx]
        return fx
