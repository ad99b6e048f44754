from .verifier import update_identities_verifier

__all__ = ["update_identities_verifier"]
