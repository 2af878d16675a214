"""Loading and rendering of the versioned role prompt templates."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

from ..errors import ValidationError
from .types import Role

_TEMPLATE_FILES: dict[Role, str] = {
    Role.QUERY_GEN: "query_gen.txt",
    Role.THEME_EXTRACT: "theme_extract.txt",
    Role.FEATURE_EXTRACT: "feature_extract.txt",
    Role.PAGE_GEN: "page_gen.txt",
    Role.ANSWER_GEN: "answer_gen.txt",
    Role.JUDGE: "judge.txt",
}


@lru_cache(maxsize=None)
def load_template(role: Role) -> str:
    ref = resources.files("featgeo.engine") / "templates" / _TEMPLATE_FILES[role]
    return ref.read_text(encoding="utf-8")


def render_prompt(role: Role, **params: str) -> str:
    """Fill a role template's named placeholders; equal inputs render byte-identically."""
    template = load_template(role)
    try:
        return template.format(**params)
    except KeyError as exc:
        raise ValidationError(f"template for {role.value} is missing parameter {exc}") from exc
