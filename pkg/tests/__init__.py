"""Tests for the sss_kv package."""
