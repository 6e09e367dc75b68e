# Window membership without the bounds conjuncts, for the 3-clause
# user-supplied vocabulary {left <= i, i <= right, a[i] = e}.

def classify(b):
    a, left, right, e, i = b["a"], b["left"], b["right"], b["e"], b["i"]
    cell = a[i] if 0 <= i < len(a) else 0
    return left <= i and i <= right and cell == e
