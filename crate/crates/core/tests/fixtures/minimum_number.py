class Solution:
    def minimum_Number(self, s):
        digits = sorted(s)
        nonzero = next((i for i, d in enumerate(digits) if d != "0"), None)
        if nonzero is None:
            return 0
        digits[0], digits[nonzero] = digits[nonzero], digits[0]
        return int("".join(digits))
