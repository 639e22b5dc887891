"""Tests for the specmine toolkit."""
