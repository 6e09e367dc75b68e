# Output is a sorted permutation of the input.

def classify(b):
    ain, aout = b["ain"], b["aout"]
    is_sorted = all(aout[k] <= aout[k + 1] for k in range(len(aout) - 1))
    return is_sorted and sorted(ain) == sorted(aout)
