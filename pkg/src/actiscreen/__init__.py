"""Actigraphy preprocessing, nocturnal motion features and RBD screening."""
