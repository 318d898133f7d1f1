from leaf_pheno.main import main

raise SystemExit(main())
