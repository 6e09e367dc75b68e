# Linear-search postcondition classification over the 6-clause vocabulary:
# valid bounds, and either rv = -1 with no hit in the window, or rv != -1
# landing on the searched value.  Reads outside [0, |a|) count as 0, matching
# the evaluator, so the answer is a function of the clause values.

def classify(b):
    a, left, right, e, rv = b["a"], b["left"], b["right"], b["e"], b["rv"]
    n = len(a)
    def cell(k):
        return a[k] if 0 <= k < n else 0
    bounds = 0 <= left <= right <= n - 1
    eina = bounds and any(left <= j <= right and a[j] == e for j in range(n))
    return bounds and ((rv == -1 and not eina)
                       or (rv != -1 and eina and cell(rv) == e))
