# Three-way classification for specification construction: malformed bounds
# are dontCare; with valid bounds, good means the search result is coherent
# (rv = -1 and the value is absent, or rv points at the value).

def classify(b):
    a, left, right, e, rv = b["a"], b["left"], b["right"], b["e"], b["rv"]
    n = len(a)
    def cell(k):
        return a[k] if 0 <= k < n else 0
    bounds = 0 <= left <= right <= n - 1
    if not bounds:
        return "dontCare"
    eina = any(left <= j <= right and a[j] == e for j in range(n))
    good = (rv == -1 and not eina) or (rv != -1 and eina and cell(rv) == e)
    return "good" if good else "bad"

three_way = True
