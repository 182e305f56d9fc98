# Game model, solvers and verification
