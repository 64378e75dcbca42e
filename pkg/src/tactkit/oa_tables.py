"""Literal orthogonal arrays (coded levels, 1-based, one row per line)."""

L4 = """
1 1 1
1 2 2
2 1 2
2 2 1
"""

L8 = """
1 1 1 1 1 1 1
1 1 1 2 2 2 2
1 2 2 1 1 2 2
1 2 2 2 2 1 1
2 1 2 1 2 1 2
2 1 2 2 1 2 1
2 2 1 1 2 2 1
2 2 1 2 1 1 2
"""

L9 = """
1 1 1 1
1 2 2 2
1 3 3 3
2 1 2 3
2 2 3 1
2 3 1 2
3 1 3 2
3 2 1 3
3 3 2 1
"""

L12 = """
1 1 1 1 1 1 1 1 1 1 1
2 2 1 2 2 2 1 1 1 2 1
1 2 2 1 2 2 2 1 1 1 2
2 1 2 2 1 2 2 2 1 1 1
1 2 1 2 2 1 2 2 2 1 1
1 1 2 1 2 2 1 2 2 2 1
1 1 1 2 1 2 2 1 2 2 2
2 1 1 1 2 1 2 2 1 2 2
2 2 1 1 1 2 1 2 2 1 2
2 2 2 1 1 1 2 1 2 2 1
1 2 2 2 1 1 1 2 1 2 2
2 1 2 2 2 1 1 1 2 1 2
"""

L16 = """
1 1 1 1 1 1 1 1 1 1 1 1 1 1 1
1 1 1 1 1 1 1 2 2 2 2 2 2 2 2
1 1 1 2 2 2 2 1 1 1 1 2 2 2 2
1 1 1 2 2 2 2 2 2 2 2 1 1 1 1
1 2 2 1 1 2 2 1 1 2 2 1 1 2 2
1 2 2 1 1 2 2 2 2 1 1 2 2 1 1
1 2 2 2 2 1 1 1 1 2 2 2 2 1 1
1 2 2 2 2 1 1 2 2 1 1 1 1 2 2
2 1 2 1 2 1 2 1 2 1 2 1 2 1 2
2 1 2 1 2 1 2 2 1 2 1 2 1 2 1
2 1 2 2 1 2 1 1 2 1 2 2 1 2 1
2 1 2 2 1 2 1 2 1 2 1 1 2 1 2
2 2 1 1 2 2 1 1 2 2 1 1 2 2 1
2 2 1 1 2 2 1 2 1 1 2 2 1 1 2
2 2 1 2 1 1 2 1 2 2 1 2 1 1 2
2 2 1 2 1 1 2 2 1 1 2 1 2 2 1
"""

L18 = """
1 1 1 1 1 1 1
1 2 2 2 2 2 2
1 3 3 3 3 3 3
2 1 1 2 2 3 3
2 2 2 3 3 1 1
2 3 3 1 1 2 2
3 1 2 1 3 2 3
3 2 3 2 1 3 1
3 3 1 3 2 1 2
1 1 3 3 2 2 1
1 2 1 1 3 3 2
1 3 2 2 1 1 3
2 1 2 3 1 3 2
2 2 3 1 2 1 3
2 3 1 2 3 2 1
3 1 3 2 3 1 2
3 2 1 3 1 2 3
3 3 2 1 2 3 1
"""

L27 = """
1 1 1 1 1 1 1 1 1 1 1 1 1
1 1 1 1 2 2 2 2 2 2 2 2 2
1 1 1 1 3 3 3 3 3 3 3 3 3
1 2 2 2 1 1 1 2 2 2 3 3 3
1 2 2 2 2 2 2 3 3 3 1 1 1
1 2 2 2 3 3 3 1 1 1 2 2 2
1 3 3 3 1 1 1 3 3 3 2 2 2
1 3 3 3 2 2 2 1 1 1 3 3 3
1 3 3 3 3 3 3 2 2 2 1 1 1
2 1 2 3 1 2 3 1 2 3 1 2 3
2 1 2 3 2 3 1 2 3 1 2 3 1
2 1 2 3 3 1 2 3 1 2 3 1 2
2 2 3 1 1 2 3 2 3 1 3 1 2
2 2 3 1 2 3 1 3 1 2 1 2 3
2 2 3 1 3 1 2 1 2 3 2 3 1
2 3 1 2 1 2 3 3 1 2 2 3 1
2 3 1 2 2 3 1 1 2 3 3 1 2
2 3 1 2 3 1 2 2 3 1 1 2 3
3 1 3 2 1 3 2 1 3 2 1 3 2
3 1 3 2 2 1 3 2 1 3 2 1 3
3 1 3 2 3 2 1 3 2 1 3 2 1
3 2 1 3 1 3 2 2 1 3 3 2 1
3 2 1 3 2 1 3 3 2 1 1 3 2
3 2 1 3 3 2 1 1 3 2 2 1 3
3 3 2 1 1 3 2 3 2 1 2 1 3
3 3 2 1 2 1 3 1 3 2 3 2 1
3 3 2 1 3 2 1 2 1 3 1 3 2
"""
