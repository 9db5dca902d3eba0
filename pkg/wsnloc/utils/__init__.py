"""Support utilities of wsnloc."""
