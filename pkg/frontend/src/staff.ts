// Staff (Role 2) home: register properties, build dossiers step by step
// (reserve a code, stamp, sign, upload), submit for validation, and follow
// the status timeline through the role-2 alert feed.

import type { DossierEntry } from "./api.js";
import { clear, h } from "./dom.js";
import { embedMarker, hasMarker, markerLine } from "./svc.js";
import { signBody } from "./crypto.js";
import { feeHint, guarded, type Ctx } from "./context.js";

export function staffView(ctx: Ctx): HTMLElement {
  const refInput = h("input", {
    class: "prop-ref",
    placeholder: "cadastral reference (20 chars)",
    maxlength: "20",
  }) as HTMLInputElement;
  const dataInput = h("input", {
    class: "prop-data",
    placeholder: "cadastral data",
  }) as HTMLInputElement;
  const metaInput = h("input", {
    class: "dossier-meta",
    placeholder: "dossier metadata",
  }) as HTMLInputElement;
  const dossierList = h("div", { class: "dossier-list" });
  const alertsList = h("ul", { class: "alerts-list" });
  let alertCursor = 0;

  const loadDossiers = guarded(ctx, async () => {
    const entries = await ctx.api.listDossiers(refInput.value.trim());
    clear(dossierList);
    for (const entry of entries) dossierList.append(dossierCard(ctx, entry, loadDossiers));
    if (entries.length === 0) dossierList.append(h("p", {}, "no dossiers yet"));
  });

  const registerProperty = guarded(ctx, async () => {
    const ref = refInput.value.trim();
    const result = await ctx.api.registerProperty(ref, dataInput.value);
    ctx.flash(`property ${result.cadastral_ref} registered (${result.receipt.fee_bnb} BNB)`);
  });

  const createDossier = guarded(ctx, async () => {
    const result = await ctx.api.createDossier(refInput.value.trim(), metaInput.value);
    ctx.flash(`dossier ${result.dossier_id} opened (${result.receipt.fee_bnb} BNB)`);
    loadDossiers();
  });

  const pollAlerts = guarded(ctx, async () => {
    const batch = await ctx.api.events(alertCursor, 2);
    alertCursor = batch.next_since;
    for (const e of batch.events) {
      alertsList.append(
        h(
          "li",
          { class: "alert", "data-event-id": e.id },
          `${e.kind}: ${e.dossier_id} is now ${e.payload.status}`,
        ),
      );
    }
    if (batch.events.length === 0) {
      ctx.flash("no new alerts");
    }
  });

  return h(
    "div",
    { class: "view staff-view" },
    h("h2", {}, "Properties and dossiers"),
    h(
      "fieldset",
      {},
      h("legend", {}, "Property"),
      refInput,
      dataInput,
      h(
        "button",
        { class: "prop-register", onClick: registerProperty },
        `Register property (${feeHint(ctx, "RegisterProperty")})`,
      ),
    ),
    h(
      "fieldset",
      {},
      h("legend", {}, "Dossiers for the reference above"),
      h("button", { class: "dossier-load", onClick: loadDossiers }, "Load dossiers"),
      metaInput,
      h(
        "button",
        { class: "dossier-new", onClick: createDossier },
        `Open dossier (${feeHint(ctx, "CreateDossier")})`,
      ),
      dossierList,
    ),
    h(
      "fieldset",
      {},
      h("legend", {}, "Alerts (status changes)"),
      h("button", { class: "alerts-poll", onClick: pollAlerts }, "Check alerts"),
      alertsList,
    ),
  );
}

function dossierCard(ctx: Ctx, entry: DossierEntry, reload: () => void): HTMLElement {
  const mine = entry.creator === ctx.session.address;
  const card = h(
    "div",
    { class: "dossier-card", "data-dossier": entry.dossier_id, "data-status": entry.status },
    h("h3", {}, `${entry.dossier_id}`),
    h(
      "p",
      { class: "dossier-status" },
      `status ${entry.status}, ${entry.document_count} document(s)` +
        (entry.metadata ? `, ${entry.metadata}` : ""),
    ),
  );
  if (entry.documents) {
    const docs = h("ul", { class: "doc-list" });
    for (const d of entry.documents) {
      docs.append(h("li", { "data-svc": d.svc }, `${d.version} ${d.svc} ${d.cid}`));
    }
    card.append(docs);
  }
  if (entry.status !== "open" || !mine) return card;

  // builder controls, only for the creator while the dossier is open
  const fileInput = h("input", { type: "file", class: "doc-file" }) as HTMLInputElement;
  const codeOut = h("span", { class: "reserved-code" });
  let reserved: string | null = null;

  const reserve = guarded(ctx, async () => {
    reserved = await ctx.api.reserveSvc(entry.dossier_id);
    clear(codeOut);
    codeOut.append(
      `reserved ${reserved} `,
      h(
        "a",
        {
          class: "marker-download",
          download: "marker.txt",
          href: `data:text/plain,${encodeURIComponent(markerLine(reserved))}`,
        },
        "download marker line",
      ),
    );
  });

  const upload = guarded(ctx, async () => {
    const file = fileInput.files?.[0];
    if (!file) {
      ctx.flash("choose a file first", "error");
      return;
    }
    let bytes: Uint8Array = new Uint8Array(await file.arrayBuffer());
    if (!hasMarker(bytes)) {
      if (!reserved) {
        ctx.flash("reserve a code first (or stamp the file yourself)", "error");
        return;
      }
      bytes = embedMarker(bytes, reserved);
    }
    const signature = await signBody(bytes, ctx.session.address, ctx.key);
    const result = await ctx.api.uploadDocument(entry.dossier_id, bytes, signature, file.name);
    ctx.flash(`uploaded ${result.svc} as ${result.cid} (${result.receipt.fee_bnb} BNB)`);
    reserved = null;
    reload();
  });

  const submit = guarded(ctx, async () => {
    const result = await ctx.api.submitDossier(entry.dossier_id);
    ctx.flash(`${entry.dossier_id} submitted for validation (${result.receipt.fee_bnb} BNB)`);
    reload();
  });

  card.append(
    h(
      "div",
      { class: "builder" },
      fileInput,
      h(
        "button",
        { class: "doc-reserve", onClick: reserve },
        "Reserve code",
      ),
      codeOut,
      h(
        "button",
        { class: "doc-upload", onClick: upload },
        `Stamp, sign and upload (${feeHint(ctx, "AddFile")})`,
      ),
      h(
        "button",
        { class: "dossier-submit", onClick: submit },
        `Submit for validation (${feeHint(ctx, "RequestValidation")})`,
      ),
    ),
  );
  return card;
}
