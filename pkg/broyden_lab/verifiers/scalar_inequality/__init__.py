from .verifier import scalar_inequality_verifier

__all__ = ["scalar_inequality_verifier"]
