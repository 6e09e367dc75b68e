# Membership-in-window classification for the generated eina vocabulary.
#
# The behavior includes the injected witness index i; the answer is a pure
# function of the vocabulary clause values (bounds, window membership, and
# the read at i), so it is consistent across every class representative.

def classify(b):
    a, left, right, e, i = b["a"], b["left"], b["right"], b["e"], b["i"]
    n = len(a)
    bounds = 0 <= left <= right <= n - 1
    cell = a[i] if 0 <= i < n else 0
    return bounds and left <= i <= right and 0 <= i <= n - 1 and cell == e
