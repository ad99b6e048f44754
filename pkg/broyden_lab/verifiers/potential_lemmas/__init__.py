from .verifier import potential_lemmas_verifier

__all__ = ["potential_lemmas_verifier"]
