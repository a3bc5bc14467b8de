// COAAT admin (Role 1) home: a validation queue fed by the submission
// alert feed, document preview, and the validate/reject decision with
// reviewed-copy uploads. The fee of the decision is shown before the
// confirmation button, as are all other action fees.

import type { DocumentEntry, DossierEntry } from "./api.js";
import { clear, h, textPreview } from "./dom.js";
import { embedMarker, hasMarker } from "./svc.js";
import { signBody } from "./crypto.js";
import { feeHint, guarded, type Ctx } from "./context.js";

export function adminView(ctx: Ctx): HTMLElement {
  const queueList = h("ul", { class: "queue-list" });
  const detail = h("div", { class: "queue-detail" });
  const queued = new Set<string>();
  let cursor = 0;

  const poll = guarded(ctx, async () => {
    const batch = await ctx.api.events(cursor, 1);
    cursor = batch.next_since;
    for (const e of batch.events) {
      if (e.kind !== "DossierSubmitted" || queued.has(e.dossier_id)) continue;
      queued.add(e.dossier_id);
      const li = h(
        "li",
        { class: "queue-entry", "data-dossier": e.dossier_id },
        `${e.dossier_id} (${e.payload.property})`,
        h(
          "button",
          {
            class: "queue-open",
            onClick: guarded(ctx, () => openDossier(ctx, e.dossier_id, detail, li, queued)),
          },
          "Open",
        ),
      );
      queueList.append(li);
    }
    if (batch.events.length === 0) ctx.flash("queue is up to date");
  });

  return h(
    "div",
    { class: "view admin-view" },
    h("h2", {}, "Validation queue"),
    h("button", { class: "queue-poll", onClick: poll }, "Poll for submissions"),
    queueList,
    detail,
  );
}

async function openDossier(
  ctx: Ctx,
  dossierId: string,
  detail: HTMLElement,
  entryLi: HTMLElement,
  queued: Set<string>,
): Promise<void> {
  const ref = dossierId.slice(0, dossierId.lastIndexOf(":"));
  const entries = await ctx.api.listDossiers(ref);
  const dossier = entries.find((d) => d.dossier_id === dossierId);
  if (!dossier) {
    ctx.flash(`dossier ${dossierId} not found`, "error");
    return;
  }
  clear(detail);
  detail.append(renderDetail(ctx, dossier, detail, entryLi, queued));
}

function renderDetail(
  ctx: Ctx,
  dossier: DossierEntry,
  detail: HTMLElement,
  entryLi: HTMLElement,
  queued: Set<string>,
): HTMLElement {
  const submitted = (dossier.documents ?? []).filter((d) => d.version === "submitted");
  const previewOut = h("pre", { class: "preview-out" });
  const decisionSelect = h(
    "select",
    { class: "decision-select" },
    h("option", { value: "validated" }, "validated"),
    h("option", { value: "rejected" }, "rejected"),
  ) as HTMLSelectElement;
  const resultPanel = h("div", { class: "decision-result" });

  const reviewInputs: HTMLInputElement[] = [];
  const docRows = h("ul", { class: "detail-docs" });
  for (const doc of submitted) {
    const input = h("input", { type: "file", class: "reviewed-file" }) as HTMLInputElement;
    reviewInputs.push(input);
    docRows.append(
      h(
        "li",
        { "data-svc": doc.svc },
        `${doc.svc} (${doc.cid})`,
        h(
          "button",
          { class: "doc-preview", onClick: guarded(ctx, () => preview(ctx, doc, previewOut)) },
          "Preview",
        ),
        h("label", {}, " reviewed copy: ", input),
      ),
    );
  }

  const decide = guarded(ctx, async () => {
    const reviewed = [];
    for (let i = 0; i < submitted.length; i++) {
      const file = reviewInputs[i]!.files?.[0];
      if (!file) {
        ctx.flash(`attach a reviewed copy for ${submitted[i]!.svc}`, "error");
        return;
      }
      let bytes: Uint8Array = new Uint8Array(await file.arrayBuffer());
      if (!hasMarker(bytes)) {
        const code = await ctx.api.reserveSvc(dossier.dossier_id);
        bytes = embedMarker(bytes, code);
      }
      const signatureHex = await signBody(bytes, ctx.session.address, ctx.key);
      reviewed.push({ body: bytes, signatureHex, name: file.name });
    }
    const decision = decisionSelect.value as "validated" | "rejected";
    const result = await ctx.api.decideDossier(dossier.dossier_id, decision, reviewed);
    queued.delete(dossier.dossier_id);
    entryLi.remove();
    clear(resultPanel);
    resultPanel.append(
      h("p", { class: "decision-line" }, `${result.dossier_id} ${result.status}`),
      h(
        "p",
        { class: "decision-receipt", "data-tx": result.receipt.tx_hash },
        `tx ${result.receipt.tx_hash} at height ${result.receipt.block_height}`,
      ),
      h(
        "ul",
        { class: "review-list" },
        ...result.reviews.map((r) =>
          h("li", { "data-svc": r.svc, "data-cid": r.cid }, `${r.svc} ${r.cid}`),
        ),
      ),
    );
    ctx.flash(`${result.dossier_id} ${result.status}`);
  });

  return h(
    "div",
    { class: "detail-card", "data-dossier": dossier.dossier_id },
    h("h3", {}, `${dossier.dossier_id} (${dossier.status})`),
    dossier.metadata ? h("p", {}, dossier.metadata) : null,
    docRows,
    previewOut,
    h(
      "p",
      { class: "fee-line" },
      `Deciding costs ${feeHint(ctx, "ValidateDossier") || "fee unknown"}`,
    ),
    decisionSelect,
    h("button", { class: "decide-btn", onClick: decide }, "Decide"),
    resultPanel,
  );
}

async function preview(ctx: Ctx, doc: DocumentEntry, out: HTMLElement): Promise<void> {
  const fetched = await ctx.api.fetchDocument(doc.svc);
  out.textContent = textPreview(fetched.body);
  out.setAttribute("data-svc", fetched.meta.svc);
}
