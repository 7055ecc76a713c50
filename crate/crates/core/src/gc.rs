//! Ordinary graph complexes (stub).
