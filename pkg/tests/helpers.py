import shuntlab as sl

# experimental beam: resonances in Hz and capacitance in F
BEAM_F_SC = 31.08
BEAM_F_OC = 31.29
BEAM_CP = 245e-9


def tuned(kc):
    """Normalized model with its optimal shunt and admittance."""
    model = sl.PiezoModel.normalized(kc)
    shunt = sl.tune_series_rl(model)
    return model, shunt, sl.shunt_admittance(shunt)


def rel(a, b):
    return abs(a - b) / abs(b)
