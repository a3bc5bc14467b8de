// Third-party verification: one input box, one code, full provenance.
// Available to every logged-in role; read-only users see nothing else.

import { clear, h, textPreview } from "./dom.js";
import { checksumValid, wellFormed } from "./svc.js";
import { guarded, type Ctx } from "./context.js";

export function verifyView(ctx: Ctx): HTMLElement {
  const input = h("input", {
    class: "svc-input",
    placeholder: "verification code, e.g. 4S7PW20RM1GFT5BH",
    maxlength: "16",
  }) as HTMLInputElement;
  const result = h("div", { class: "svc-result" });

  const lookUp = guarded(ctx, async () => {
    const code = input.value.trim().toUpperCase();
    clear(result);
    if (wellFormed(code) && !(await checksumValid(code))) {
      // the server would reject this too; saying so locally saves a trip
      ctx.flash("MalformedSvc: checksum does not match", "error");
      return;
    }
    const { body, meta } = await ctx.api.fetchDocument(code);
    const when = new Date(meta.timestamp * 1000).toISOString();
    const fields: [string, string][] = [
      ["svc", meta.svc],
      ["cid", meta.cid],
      ["version", meta.version],
      ["tx-hash", meta.txHash],
      ["timestamp", when],
      ["uploader", meta.uploader],
      ["dossier", meta.dossierId],
      ["status", meta.status],
      ["property", meta.property],
    ];
    const dl = h("dl", { class: "provenance" });
    for (const [name, value] of fields) {
      dl.append(h("dt", {}, name), h("dd", { "data-field": name }, value));
    }
    result.append(
      h("h3", {}, `Document ${meta.svc}`),
      dl,
      h("pre", { class: "doc-body" }, textPreview(body)),
    );
    ctx.flash(`document ${meta.svc} verified`);
  });

  return h(
    "div",
    { class: "view verify-view" },
    h("h2", {}, "Verify a document"),
    h("p", {}, "Paste the code printed on the document to fetch its on-chain record."),
    input,
    h("button", { class: "svc-check", onClick: lookUp }, "Look up"),
    result,
  );
}
