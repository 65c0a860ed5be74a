class NotPositiveDefiniteError(ArithmeticError):
    """The Riccati inner matrix ``Psi + Gamma' P Gamma`` lost positive definiteness.

    On the simplex this cannot happen; it signals a weight vector perturbed
    too far outside it.
    """

    def __init__(self, k: int):
        self.k = k
        super().__init__(f"Psi + Gamma' P Gamma not positive definite at interval {k}")
