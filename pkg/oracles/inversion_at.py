# Adjacent inversion at the witness position (not-sorted, existential mode).

def classify(b):
    a, i = b["a"], b["i"]
    n = len(a)
    def cell(k):
        return a[k] if 0 <= k < n else 0
    return (0 <= i <= n - 1 and 0 <= i + 1 <= n - 1
            and not cell(i) <= cell(i + 1))
