"""Child-side launcher: apply resource limits, drop network, exec user code.

Runs as a standalone script (stdlib only) so the sandboxed interpreter
never imports this package. The parent passes a JSON spec as argv[1]:

    {"cmd": [...], "mem_bytes": int|null, "fsize_bytes": int|null,
     "net": "try"|"require"|"off", "report_path": "<file>"}

Network isolation tries, in order: a fresh network namespace (works as
root), an unprivileged user+network namespace, and finally a seccomp
BPF filter that denies socket creation with EPERM. The mechanism used
("netns", "userns", "seccomp" or "none") is written to report_path so
the parent can record it. With net == "require", exec is refused
(exit 97) when no mechanism sticks.
"""

import ctypes
import ctypes.util
import json
import os
import platform
import resource
import struct
import sys

CLONE_NEWNET = 0x40000000
CLONE_NEWUSER = 0x10000000

PR_SET_NO_NEW_PRIVS = 38
PR_SET_SECCOMP = 22
SECCOMP_MODE_FILTER = 2
SECCOMP_RET_ALLOW = 0x7FFF0000
SECCOMP_RET_ERRNO = 0x00050000
EPERM = 1

# audit arch constant and socket(2) syscall number per machine
_ARCH_TABLE = {
    "x86_64": (0xC000003E, 41),
    "aarch64": (0xC00000B7, 198),
}

AF_INET, AF_INET6, AF_PACKET = 2, 10, 17


def _bpf(code, jt, jf, k):
    return struct.pack("HBBI", code, jt, jf, k)


def _install_seccomp(libc) -> bool:
    """Deny internet-family socket creation with EPERM.

    AF_UNIX stays allowed so multiprocessing-style user code keeps
    working; foreign-arch syscalls are denied outright so the filter
    cannot be sidestepped through the 32-bit syscall table.
    """
    entry = _ARCH_TABLE.get(platform.machine())
    if entry is None:
        return False
    audit_arch, socket_nr = entry
    LD_W_ABS = 0x20
    JEQ_K = 0x15
    RET_K = 0x06
    prog = b"".join(
        [
            _bpf(LD_W_ABS, 0, 0, 4),             # 0: audit arch
            _bpf(JEQ_K, 0, 7, audit_arch),       # 1: foreign arch -> deny
            _bpf(LD_W_ABS, 0, 0, 0),             # 2: syscall number
            _bpf(JEQ_K, 0, 4, socket_nr),        # 3: not socket -> allow
            _bpf(LD_W_ABS, 0, 0, 16),            # 4: args[0] (socket family)
            _bpf(JEQ_K, 3, 0, AF_INET),          # 5
            _bpf(JEQ_K, 2, 0, AF_INET6),         # 6
            _bpf(JEQ_K, 1, 0, AF_PACKET),        # 7
            _bpf(RET_K, 0, 0, SECCOMP_RET_ALLOW),       # 8
            _bpf(RET_K, 0, 0, SECCOMP_RET_ERRNO | EPERM),  # 9
        ]
    )
    buf = ctypes.create_string_buffer(prog)

    class SockFprog(ctypes.Structure):
        _fields_ = [("len", ctypes.c_ushort), ("filter", ctypes.c_void_p)]

    fprog = SockFprog(len(prog) // 8, ctypes.cast(buf, ctypes.c_void_p))
    if libc.prctl(PR_SET_NO_NEW_PRIVS, 1, 0, 0, 0) != 0:
        return False
    return libc.prctl(PR_SET_SECCOMP, SECCOMP_MODE_FILTER, ctypes.byref(fprog), 0, 0) == 0


def _drop_network() -> str:
    if not sys.platform.startswith("linux"):
        return "none"
    try:
        libc = ctypes.CDLL(None, use_errno=True)
    except OSError:
        return "none"
    if libc.unshare(CLONE_NEWNET) == 0:
        return "netns"
    if libc.unshare(CLONE_NEWUSER | CLONE_NEWNET) == 0:
        return "userns"
    if _install_seccomp(libc):
        return "seccomp"
    return "none"


def main() -> None:
    spec = json.loads(sys.argv[1])

    if spec.get("mem_bytes"):
        limit = int(spec["mem_bytes"])
        resource.setrlimit(resource.RLIMIT_AS, (limit, limit))
    if spec.get("fsize_bytes"):
        limit = int(spec["fsize_bytes"])
        resource.setrlimit(resource.RLIMIT_FSIZE, (limit, limit))
    resource.setrlimit(resource.RLIMIT_CORE, (0, 0))

    net = spec.get("net", "try")
    mechanism = "none" if net == "off" else _drop_network()
    report_path = spec.get("report_path")
    if report_path:
        with open(report_path, "w") as fh:
            fh.write(mechanism)
    if net == "require" and mechanism == "none":
        sys.stderr.write("sandbox: network isolation required but unavailable\n")
        sys.exit(97)

    cmd = spec["cmd"]
    os.execvp(cmd[0], cmd)


if __name__ == "__main__":
    main()
