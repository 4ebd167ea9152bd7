"""ADHM data on ALE spaces: McKay quivers, duality, reflection functors and SO/Sp fixed loci."""
