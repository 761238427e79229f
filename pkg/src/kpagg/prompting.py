"""Prompt variants and chat-message rendering.

Six variants share one template: a user sentence, an instruction block, and
the document's title and body. Specialist variants swap the user sentence;
control variants turn the instruction block into a numbered list (length
control first when combined, formatting always last). For news-domain
documents every occurrence of "scientific document" in the configured
prompt strings is replaced with "news article"; document text itself is
never rewritten.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

from .corpus import Document

VARIANTS = (
    "baseline",
    "present_specialist",
    "absent_specialist",
    "order_control",
    "length_control",
    "combined_control",
)

# short CLI aliases
VARIANT_ALIASES = {
    "baseline": "baseline",
    "present": "present_specialist",
    "absent": "absent_specialist",
    "order": "order_control",
    "length": "length_control",
    "combined": "combined_control",
}

PRESENT_SPECIALIST_SENTENCE = (
    "Extract present keyphrases from the following title and abstract of a "
    "scientific document."
)
ABSENT_SPECIALIST_SENTENCE = (
    "Generate absent keyphrases from the following title and abstract of a "
    "scientific document."
)

_DOMAIN_SUBSTITUTION = ("scientific document", "news article")

_CONFIG_KEYS = (
    "system_prompt",
    "user_prompt_baseline",
    "instruction_formatting",
    "instruction_order",
    "instruction_length",
)


class PromptConfigError(Exception):
    """The prompt configuration file is missing or incomplete."""


@dataclass(frozen=True)
class PromptConfig:
    system_prompt: str
    user_prompt_baseline: str
    instruction_formatting: str
    instruction_order: str
    instruction_length: str


@dataclass(frozen=True)
class RenderedPrompt:
    system: str
    user: str
    assistant_prefill: str
    prompt_hash: str


def load_prompt_config(path: str | Path | None = None) -> PromptConfig:
    """Load prompt strings from a YAML file; default to the bundled one."""
    if path is None:
        text = resources.files("kpagg").joinpath("data/prompts.yaml").read_text("utf-8")
        source = "bundled prompts.yaml"
    else:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise PromptConfigError(f"cannot read prompt config {path}: {exc}") from exc
        source = str(path)
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise PromptConfigError(f"{source}: invalid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise PromptConfigError(f"{source}: expected a mapping of prompt strings")
    values = {}
    for key in _CONFIG_KEYS:
        value = data.get(key)
        if not isinstance(value, str) or not value.strip():
            raise PromptConfigError(f"{source}: missing or empty key {key!r}")
        values[key] = value.strip()
    return PromptConfig(**values)


def resolve_variant(name: str) -> str:
    """Map a CLI alias or full variant name to the canonical variant name."""
    if name in VARIANT_ALIASES:
        return VARIANT_ALIASES[name]
    if name in VARIANTS:
        return name
    raise PromptConfigError(f"unknown prompt variant {name!r}")


def _numbered(items: list[str]) -> str:
    return "\n".join(f"{i}. {text}" for i, text in enumerate(items, start=1))


def _instruction_block(variant: str, cfg: PromptConfig) -> str:
    fmt = cfg.instruction_formatting
    if variant == "order_control":
        return _numbered([cfg.instruction_order, fmt])
    if variant == "length_control":
        return _numbered([cfg.instruction_length, fmt])
    if variant == "combined_control":
        return _numbered([cfg.instruction_length, cfg.instruction_order, fmt])
    return fmt


def _user_sentence(variant: str, cfg: PromptConfig) -> str:
    if variant == "present_specialist":
        return PRESENT_SPECIALIST_SENTENCE
    if variant == "absent_specialist":
        return ABSENT_SPECIALIST_SENTENCE
    return cfg.user_prompt_baseline


def prompt_digest(system: str, user: str, assistant_prefill: str) -> str:
    """Stable hex digest of the rendered fields (length-prefixed sha256)."""
    h = hashlib.sha256()
    for field in (system, user, assistant_prefill):
        data = field.encode("utf-8")
        h.update(str(len(data)).encode("ascii"))
        h.update(b":")
        h.update(data)
    return h.hexdigest()


def build_prompt(
    doc: Document,
    variant: str,
    cfg: PromptConfig,
    prefill_supported: bool = True,
) -> RenderedPrompt:
    """Render one chat prompt for a document under the given variant."""
    variant = resolve_variant(variant)
    system = cfg.system_prompt
    sentence = _user_sentence(variant, cfg)
    block = _instruction_block(variant, cfg)
    if doc.domain == "news":
        old, new = _DOMAIN_SUBSTITUTION
        system = system.replace(old, new)
        sentence = sentence.replace(old, new)
        block = block.replace(old, new)
    user = f"{sentence}\n\n{block}\n\nTitle: {doc.title}\nAbstract: {doc.body}"
    prefill = "[" if prefill_supported else ""
    return RenderedPrompt(
        system=system,
        user=user,
        assistant_prefill=prefill,
        prompt_hash=prompt_digest(system, user, prefill),
    )
