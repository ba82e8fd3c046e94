"""Turning formula pairs into model input."""
from csfi.cnf import parse_formula
from csfi.generator import DatasetSpec, GenParams, generate_samples
from csfi.tokenizer import build_vocabulary, decode, encode_formula, encode_pair, vocabulary_from_samples

f = parse_formula("(a ∨ c) ∧ (c ∨ b)")
v = build_vocabulary([f])
ids = encode_formula(f, v)
print("vocabulary:", v.tokens)
print("tokens    :", [v.token(i) for i in ids])

# A pair is both formulas back to back; the model sees both orders.
g = parse_formula("(b | a) & (a)")
v = build_vocabulary([f, g])
pair = encode_pair(f, g, v, max_len=16)
print("pair      :", [v.token(i) for i in pair])
print("decoded   :", decode(pair, v))

samples = generate_samples(DatasetSpec(200, params=GenParams(seed=1)))
v = vocabulary_from_samples(samples)
lengths = [sum(i != v.pad_id for i in encode_pair(s.alpha, s.beta, v)) for s in samples]
print(f"\n{len(v)} tokens in the vocabulary; pair lengths {min(lengths)}..{max(lengths)} (limit 512)")
