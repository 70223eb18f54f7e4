"""Scriptable external analyzer for protocol tests.

Usage: fake_adapter.py MODE [ARG]

identity     accept every word
reject       reject every word
lexicon F    accept words listed in file F
short        drop the last reply, exit 0
crash N      exit 3 after N replies
hang N       stop answering after N replies
garbage N    corrupt reply N (0-based)
reorder      swap the first two replies of each batch
extra        send one surplus line at the end
log F        identity, appending each read line count to F on exit
"""

import sys


def main():
    mode = sys.argv[1] if len(sys.argv) > 1 else "identity"
    arg = sys.argv[2] if len(sys.argv) > 2 else None
    accept = None
    if mode == "lexicon":
        with open(arg, encoding="utf-8") as f:
            accept = {w.strip() for w in f if w.strip()}
    n = int(arg) if mode in ("crash", "hang", "garbage") else None
    out = sys.stdout
    held = None
    replied = 0
    seen = 0
    lines = sys.stdin.buffer
    pending = []
    for raw in lines:
        word = raw.decode("utf-8").rstrip("\n")
        seen += 1
        if mode == "reject":
            ok = False
        elif accept is not None:
            ok = word in accept
        else:
            ok = True
        reply = f"{word}\t{int(ok)}\n"
        if mode == "crash" and replied >= n:
            out.flush()
            sys.exit(3)
        if mode == "hang" and replied >= n:
            out.flush()
            for _ in lines:
                pass
            import time
            time.sleep(60)
        if mode == "garbage" and replied == n:
            reply = f"{word}\tmaybe\n"
        if mode == "short":
            if held is not None:
                out.write(held)
                out.flush()
            held = reply
            replied += 1
            continue
        if mode == "reorder":
            pending.append(reply)
            if len(pending) == 2:
                out.write(pending[1] + pending[0])
                out.flush()
                pending = []
            replied += 1
            continue
        out.write(reply)
        out.flush()
        replied += 1
    for p in pending:
        out.write(p)
    if mode == "extra":
        out.write("surplus\t1\n")
    out.flush()
    if mode == "log":
        with open(arg, "a", encoding="utf-8") as f:
            f.write(f"{seen}\n")


if __name__ == "__main__":
    main()
