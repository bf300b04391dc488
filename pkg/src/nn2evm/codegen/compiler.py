"""Optional hook into an installed Solidity compiler (``solc`` or ``solcjs``).

The compiler is located through ``$NN2EVM_SOLC`` or on ``PATH`` and driven
through its standard-JSON interface, which both binaries accept on stdin.
"""
from __future__ import annotations

import json
import os
import shutil
import subprocess
from dataclasses import dataclass, replace

from ..errors import CompilerError

ENV_VAR = "NN2EVM_SOLC"
CANDIDATES = ("solc", "solcjs")


def find_compiler() -> str | None:
    explicit = os.environ.get(ENV_VAR)
    if explicit:
        return explicit if os.path.exists(explicit) or shutil.which(explicit) else None
    for name in CANDIDATES:
        path = shutil.which(name)
        if path:
            return path
    return None


def compiler_version(solc: str | None = None) -> str:
    solc = solc or find_compiler()
    if solc is None:
        raise CompilerError("no Solidity compiler found")
    r = subprocess.run([solc, "--version"], capture_output=True, text=True, timeout=60)
    return r.stdout.strip().splitlines()[-1]


@dataclass(frozen=True)
class CompileResult:
    bytecode: bytes  # creation code
    runtime_bytecode: bytes
    diagnostics: tuple[str, ...]  # warnings and infos; errors raise


def compile_source(source: str, contract: str = "MLPClassifier", solc: str | None = None, optimize: bool = False) -> CompileResult:
    solc = solc or find_compiler()
    if solc is None:
        raise CompilerError(f"no Solidity compiler found (set {ENV_VAR} or put solc on PATH)")
    unit = f"{contract}.sol"
    request = {
        "language": "Solidity",
        "sources": {unit: {"content": source}},
        "settings": {
            "optimizer": {"enabled": optimize},
            "outputSelection": {"*": {"*": ["evm.bytecode.object", "evm.deployedBytecode.object"]}},
        },
    }
    try:
        r = subprocess.run([solc, "--standard-json"], input=json.dumps(request), capture_output=True, text=True, timeout=600)
    except (OSError, subprocess.TimeoutExpired) as exc:
        raise CompilerError(f"could not run {solc}: {exc}") from None
    out = r.stdout
    if "{" not in out:
        raise CompilerError(f"{solc} produced no JSON output: {r.stderr.strip()[:500]}")
    doc = json.loads(out[out.index("{") :])
    msgs = doc.get("errors", [])
    errors = [m.get("formattedMessage", m.get("message", "")) for m in msgs if m.get("severity") == "error"]
    if errors:
        raise CompilerError("compilation failed:\n" + "\n".join(errors))
    try:
        evm = doc["contracts"][unit][contract]["evm"]
    except KeyError:
        raise CompilerError(f"compiler output has no contract {contract!r}") from None
    return CompileResult(
        bytes.fromhex(evm["bytecode"]["object"]),
        bytes.fromhex(evm["deployedBytecode"]["object"]),
        tuple(m.get("formattedMessage", m.get("message", "")) for m in msgs),
    )


def with_bytecode(artifact, solc: str | None = None):
    """Copy of ``artifact`` carrying its compiled creation and runtime code."""
    res = compile_source(artifact.source, solc=solc)
    return replace(artifact, bytecode=res.bytecode, runtime_bytecode=res.runtime_bytecode)
