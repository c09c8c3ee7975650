def validate_test_input(input_string):
    lines = input_string.strip().split("\n")
    try:
        t = int(lines[0])
        pairs = [tuple(map(int, line.split())) for line in lines[1:]]
    except ValueError:
        return False
    if not (1 <= t <= 100) or len(pairs) != t:
        return False
    return all(len(p) == 2 and all(1 <= v <= 10**9 for v in p) for p in pairs)
