// SMT-LIB2 stdin/stdout front-end for the z3 WebAssembly library.
//
// Reads complete top-level s-expression commands from stdin, evaluates each
// in one persistent solver context, and writes the solver's textual output
// to stdout.  This makes the wasm build usable like a solver binary running
// `z3 -in -smt2`.
//
// Usage: node z3_stdio.js [module-path]
//   module-path: directory or module id to require (default "z3-solver").

"use strict";

const moduleId = process.argv[2] || "z3-solver";

function splitCommands(buf) {
  // Returns [commands, rest]: complete top-level commands and the unconsumed
  // tail.  Tracks parens outside comments, string literals and |symbols|.
  const cmds = [];
  let depth = 0, start = 0, i = 0;
  let inStr = false, inSym = false, inComment = false;
  while (i < buf.length) {
    const ch = buf[i];
    if (inComment) {
      if (ch === "\n") inComment = false;
    } else if (inStr) {
      if (ch === '"') {
        if (buf[i + 1] === '"') i++; else inStr = false;
      }
    } else if (inSym) {
      if (ch === "|") inSym = false;
    } else if (ch === ";") {
      inComment = true;
    } else if (ch === '"') {
      inStr = true;
    } else if (ch === "|") {
      inSym = true;
    } else if (ch === "(") {
      if (depth === 0) start = i;
      depth++;
    } else if (ch === ")") {
      depth--;
      if (depth === 0) cmds.push(buf.slice(start, i + 1));
      if (depth < 0) depth = 0;
    }
    i++;
  }
  const rest = depth > 0 ? buf.slice(start) : "";
  return [cmds, rest];
}

(async () => {
  let init;
  try {
    ({ init } = require(moduleId));
  } catch (e) {
    process.stderr.write(`cannot load z3 module ${moduleId}: ${e}\n`);
    process.exit(3);
  }
  const { Z3 } = await init();
  const cfg = Z3.mk_config();
  const ctx = Z3.mk_context(cfg);
  Z3.del_config(cfg);

  let pending = "";
  let held = [];
  let queue = Promise.resolve();

  const handle = (batch) => {
    // One eval per request batch: much cheaper than per-command calls, and
    // eval_smtlib2_string accepts whole scripts.
    queue = queue.then(async () => {
      let exit = false;
      if (/\(\s*exit\s*\)\s*$/.test(batch)) {
        batch = batch.replace(/\(\s*exit\s*\)\s*$/, "");
        exit = true;
      }
      let out = "";
      if (batch.trim().length) {
        try {
          out = await Z3.eval_smtlib2_string(ctx, batch);
        } catch (e) {
          out = `(error "${String(e).replace(/"/g, "'")}")\n`;
        }
      }
      if (out && out.length) process.stdout.write(out);
      if (exit) process.stdout.write("", () => process.exit(0));
    });
  };

  // Commands accumulate until an echo command (the client's sync marker) or
  // an (exit); pipe fragmentation then never splits one request into many
  // small evals.
  const isFlushPoint = (c) => /^\(\s*(echo|exit)\b/.test(c);

  process.stdin.setEncoding("utf8");
  process.stdin.on("data", (chunk) => {
    pending += chunk;
    const [cmds, rest] = splitCommands(pending);
    pending = rest;
    for (const c of cmds) {
      held.push(c);
      if (isFlushPoint(c)) {
        handle(held.join("\n"));
        held = [];
      }
    }
  });
  process.stdin.on("end", () => {
    if (held.length) {
      handle(held.join("\n"));
      held = [];
    }
    queue.then(() => process.exit(0));
  });
})();
