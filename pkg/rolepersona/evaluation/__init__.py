"""Evaluation metrics for role-playing models."""
