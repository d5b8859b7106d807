"""Epistemic gossip model checker."""
