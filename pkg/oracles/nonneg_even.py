# Nonnegative even scalars.

def classify(b):
    x = b["x"]
    return x >= 0 and x % 2 == 0
