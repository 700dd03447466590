#!/usr/bin/env python3
"""
Diagnose a result store - check file size, table contents and suspicious records
"""
import json
import math
import sys
from collections import Counter
from pathlib import Path

DB_PATH = sys.argv[1] if len(sys.argv) > 1 else 'results/results.json'

print("=" * 60)
print("RESULT STORE DIAGNOSTIC")
print("=" * 60)

db_file = Path(DB_PATH)
if not db_file.exists():
    print(f"ERROR: Result store doesn't exist: {DB_PATH}")
    sys.exit(1)

size_bytes = db_file.stat().st_size
print(f"\nFile size: {size_bytes:,} bytes ({size_bytes / 1024:.1f} KB)")

print("\nLoading result store...")
try:
    with open(DB_PATH, 'r') as f:
        data = json.load(f)
except json.JSONDecodeError as e:
    print(f"ERROR: Invalid JSON: {e}")
    sys.exit(1)


def records(table):
    # TinyDB keeps each table as {doc_id: document}
    value = data.get(table, {})
    return list(value.values()) if isinstance(value, dict) else []


print("\nAll tables in the store:")
for table_name, table in data.items():
    if isinstance(table, dict):
        print(f"  {table_name}: {len(table):,} records")
    else:
        print(f"  {table_name}: {type(table)} ⚠ unexpected layout")

print("\nRuns (meta):")
meta = records('meta')
if not meta:
    print("  No runs recorded")
for m in sorted(meta, key=lambda m: m.get('config_hash', '')):
    print(f"  {m.get('command', '?'):14s} hash {str(m.get('config_hash'))[:12]}  seed {m.get('seed')}")

print("\nCartan solutions:")
solutions = records('cartan_solutions')
if not solutions:
    print("  No solutions found")
for s in solutions:
    residual = s.get('residual')
    flag = ' ⚠ large residual' if residual is not None and residual > 1e-6 else ''
    print(f"  U={s.get('U')} V={s.get('V')} seed={s.get('seed')} residual={residual}{flag}")

print("\nDMFT runs:")
runs = records('dmft_runs')
if not runs:
    print("  No DMFT runs found")
for run in sorted(runs, key=lambda r: r.get('U', 0.0)):
    history = run.get('history', [])
    mark = '✓' if run.get('converged') else '✗'
    print(f"  [{mark}] U={run.get('U')}: {run.get('terminated_reason')} after {len(history)} iterations, "
          f"Z_final={run.get('Z_final')}")
    clamped = [h['iteration'] for h in history if h.get('z_clamped')]
    if clamped:
        print(f"    ⚠ Z > 1 clamped at iterations {clamped}")
    missing = [h['iteration'] for h in history if not h.get('found1')]
    if missing:
        print(f"    ⚠ omega1 not found at iterations {missing}")

print("\nChecking for duplicate DMFT runs...")
keys = [(r.get('U'), r.get('config_hash')) for r in runs]
duplicates = [key for key, count in Counter(keys).items() if count > 1]
if duplicates:
    for U, digest in duplicates:
        print(f"  ⚠ WARNING: U={U} hash {str(digest)[:12]} stored more than once")
else:
    print("  No duplicates found")

print("\nPhase diagram:")
rows = sorted(records('phase_diagram'), key=lambda r: r.get('U', 0.0))
if not rows:
    print("  No phase-diagram rows found")
for row in rows:
    z, z_exact = row.get('Z_final'), row.get('Z_exact')
    if z is None:
        print(f"  U={row.get('U')}: no result ({row.get('terminated_reason')}: {row.get('error')})")
        continue
    deviation = abs(z - z_exact) if z_exact is not None and math.isfinite(z) else float('nan')
    print(f"  U={row.get('U')}: Z_final={z:.4f} Z_exact={z_exact:.4f} |diff|={deviation:.4f}")

print("\n" + "=" * 60)
print("Diagnostic complete")
