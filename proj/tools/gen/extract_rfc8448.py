#!/usr/bin/env python3
"""Extracts RFC 8448 trace values from a test corpus file into a C++ header."""
import re
import sys

src = open(sys.argv[1]).read()
out = open(sys.argv[2], "w")

hex_call = re.compile(r'hex_decode(?:_locked)?\(\s*((?:"[^"]*"\s*(?:/\*.*?\*/)?\s*)+)\)', re.S)
const_decl = re.compile(r'const auto (\w+)\s*=\s*$')
testdata = re.compile(r'RFC8448_TestData\("(\w+)"')


def literal(block):
    return "".join(re.findall(r'"([^"]*)"', block)).replace(" ", "")


sections = {
    "rtt1": src[src.index("test_secret_derivation_rfc8448_rtt1"):src.index("test_secret_derivation_rfc8448_rtt0")],
    "rtt0": src[src.index("test_secret_derivation_rfc8448_rtt0"):],
}

out.write("// SPDX-License-Identifier: Apache-2.0\n// Generated by tools/gen/extract_rfc8448.py. Do not edit.\n")
out.write("#pragma once\n\nnamespace rfc8448 {\n")
seen = set()
for prefix, text in sections.items():
    out.write(f"namespace {prefix} {{\n")
    pending_record = None
    record_parts = []
    for m in hex_call.finditer(text):
        before = text[:m.start()]
        tail = before[before.rfind(";") + 1:]
        rec = testdata.search(tail)
        value = literal(m.group(1))
        if rec:
            if pending_record != rec.group(1):
                pending_record = rec.group(1)
                record_parts = []
            record_parts.append(value)
            if len(record_parts) == 3:
                name = pending_record
                out.write(f'inline constexpr const char* {name}_header = "{record_parts[0]}";\n')
                out.write(f'inline constexpr const char* {name}_ciphertext = "{record_parts[1]}";\n')
                out.write(f'inline constexpr const char* {name}_plaintext = "{record_parts[2]}";\n')
            continue
        decl = re.search(r'(?:const auto|auto)\s+(\w+)\s*=\s*(?:Botan::)?$', before.rstrip())
        if not decl:
            continue
        name = decl.group(1)
        key = (prefix, name)
        if key in seen:
            continue
        seen.add(key)
        out.write(f'inline constexpr const char* {name} = "{value}";\n')
    out.write(f"}}  // namespace {prefix}\n")
out.write("}  // namespace rfc8448\n")
out.close()

if len(sys.argv) > 3:
    py = open(sys.argv[3]).read()
    names = ["client_key_public", "client_key_private", "client_hello_plaintext", "server_hello_payload",
             "server_certificate_message", "server_certificateverify_message"]
    with open(sys.argv[2]) as f:
        body = f.read()
    body = body.rstrip().removesuffix("}  // namespace rfc8448")
    body += "namespace messages {\n"
    for n in names:
        m = re.search(n + r' = clean\("""(.*?)"""\)', py, re.S)
        value = "".join(c for c in m.group(1) if c.isalnum())
        body += f'inline constexpr const char* {n} = "{value}";\n'
    body += "}  // namespace messages\n}  // namespace rfc8448\n"
    with open(sys.argv[2], "w") as f:
        f.write(body)
