"""Exception types shared across the package."""

from __future__ import annotations


class CastmaskError(Exception):
    """Base class for domain errors raised by this package."""


class SceneSpecError(CastmaskError):
    """A scene script or annotation document failed validation.

    Carries one (field_path, message) pair per problem so CLI diagnostics
    can point at the offending field.
    """

    def __init__(self, diagnostics: list[tuple[str, str]]):
        self.diagnostics = list(diagnostics)
        lines = "; ".join(f"{path}: {msg}" for path, msg in self.diagnostics)
        super().__init__(lines or "invalid document")


class UncategorizedActionError(SceneSpecError):
    """No action category keyword matched the action text."""

    def __init__(self, action_text: str, path: str = "action"):
        super().__init__([(path, f"no action category matched {action_text!r}")])
        self.action_text = action_text


class DegenerateRegionError(CastmaskError):
    """An event maps to an empty latent-token region; the annotation is unusable."""


class ArtifactError(CastmaskError):
    """A recipe or block file is malformed, truncated, or fails its checksum."""


class TransportError(CastmaskError):
    """An oracle endpoint could not be reached or returned garbage."""
