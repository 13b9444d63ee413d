"""Tests for the credit score stacking toolkit."""
